"""ERM pretraining and inference-informed continual training (IICT) with a tail-W1 penalty.

The tail penalty compares model quantiles on a large input pool with the
reference quantiles at fixed probability levels. Only the pool points that
attain those quantiles carry gradient, and their indices are frozen between
periodic refreshes.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .distributions import EmpiricalDistribution, QuantileSet, order_statistic_rank
from .model import AdamState, MlpParams, adam_step, init_mlp, mlp_backward, mlp_forward
from .problems import Dataset

log = logging.getLogger(__name__)

__all__ = [
    "Dataset", "EtaConfig", "IndexSets", "Observable", "IdentityObservable", "MaxObservable",
    "WeightedAbsObservable", "TrainingDiverged", "TrainResult", "erm_loss", "w1_tail_loss",
    "reference_quantiles", "update_index", "refresh_is_idempotent", "train_erm", "train_iict",
    "evaluate_observable", "write_log_csv",
]


class TrainingDiverged(FloatingPointError):
    pass


# --------------------------------------------------------------------------- observables


class Observable:
    """Scalar observable ``g`` of a model state, with optional component selection.

    ``select`` returns, per state, the component that triggers ``g``, or
    ``None`` when ``g`` does not single out a component. ``frozen`` gives
    the surrogate value and its state gradient with the selected components
    held fixed, used between index refreshes.
    """

    name = "observable"

    def __call__(self, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def select(self, U: np.ndarray) -> np.ndarray | None:
        return None

    def frozen(self, U: np.ndarray, J: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


class IdentityObservable(Observable):
    """``g(u) = u`` for one-dimensional states."""

    name = "identity"

    def __call__(self, U):
        U = np.asarray(U, dtype=float)
        return U.reshape(U.shape[0], -1)[:, 0].copy()

    def frozen(self, U, J):
        U = np.asarray(U, dtype=float).reshape(len(U), -1)
        grad = np.zeros_like(U)
        grad[:, 0] = 1.0
        return U[:, 0].copy(), grad


class MaxObservable(Observable):
    """Component maximum; between refreshes the frozen component replaces ``g``."""

    name = "max"

    def __call__(self, U):
        return np.max(np.asarray(U, dtype=float), axis=1)

    def select(self, U):
        return np.argmax(np.asarray(U, dtype=float), axis=1)

    def frozen(self, U, J):
        U = np.asarray(U, dtype=float)
        if J is None:
            J = self.select(U)
        rows = np.arange(U.shape[0])
        grad = np.zeros_like(U)
        grad[rows, J] = 1.0
        return U[rows, J], grad


class WeightedAbsObservable(Observable):
    """``g(u) = sum_k w_k |u_k|``; the triggering component is the largest term.

    ``g`` is smooth away from ``u_k = 0``, so the frozen surrogate is ``g``
    itself. The selected components are still recorded at each refresh.
    """

    name = "weighted_abs"

    def __init__(self, weights: Sequence[float]):
        self.weights = np.asarray(weights, dtype=float)

    def __call__(self, U):
        return np.abs(np.asarray(U, dtype=float)) @ self.weights

    def select(self, U):
        return np.argmax(np.abs(np.asarray(U, dtype=float)) * self.weights, axis=1)

    def frozen(self, U, J):
        U = np.asarray(U, dtype=float)
        return self(U), self.weights * np.sign(U)


def observable_for(problem_mode: str) -> Observable:
    if problem_mode == "toy1d":
        return IdentityObservable()
    if problem_mode == "toy2d":
        return WeightedAbsObservable([2.0, 0.5])
    raise ValueError(f"no observable for {problem_mode!r}")


# --------------------------------------------------------------------------- config / index sets


@dataclass
class EtaConfig:
    lam: float = 1.0
    tau: float = 0.0
    omega: int = 30
    steps: int = 3000
    lr: float = 1e-3
    seed: int = 0
    pool_size: int = 100_000
    batch_size: int | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")
        if not 0 <= self.tau < 1:
            raise ValueError("tau must lie in [0, 1)")
        if self.omega < 1:
            raise ValueError("omega must be >= 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")


@dataclass
class IndexSets:
    """Pool indices attaining each quantile level and, optionally, the triggering components."""

    input_indices: np.ndarray
    component_indices: np.ndarray | None
    ranks: np.ndarray

    def __len__(self) -> int:
        return int(self.input_indices.size)


def evaluate_observable(params: MlpParams, pool: np.ndarray, g: Observable, chunk: int = 8192):
    """``(g(f(pool)), f(pool))`` evaluated chunk by chunk in index order."""
    outs = [mlp_forward(params, pool[i:i + chunk]) for i in range(0, pool.shape[0], chunk)]
    U = np.concatenate(outs, axis=0)
    return g(U), U


def update_index(params: MlpParams, Q: QuantileSet, pool: np.ndarray, g: Observable) -> IndexSets:
    """Locate, for every level q, the pool point at rank ``ceil(q n)`` of ``g(f(pool))``.

    Ties are broken by pool index (stable sort).
    """
    pool = np.asarray(pool, dtype=float)
    if pool.shape[0] == 0:
        raise ValueError("empty input pool")
    vals, U = evaluate_observable(params, pool, g)
    perm = np.argsort(vals, kind="stable")
    ranks = order_statistic_rank(Q.probs, pool.shape[0])
    I = perm[ranks - 1]
    J = g.select(U[I])
    return IndexSets(I, None if J is None else np.asarray(J), ranks)


def refresh_is_idempotent(params: MlpParams, Q: QuantileSet, pool: np.ndarray, g: Observable,
                          idx: IndexSets) -> bool:
    """Re-evaluate the pool and check the recorded ranks are reproduced exactly."""
    again = update_index(params, Q, pool, g)
    if not np.array_equal(again.input_indices, idx.input_indices):
        return False
    if (again.component_indices is None) != (idx.component_indices is None):
        return False
    return idx.component_indices is None or np.array_equal(again.component_indices, idx.component_indices)


def reference_quantiles(nu0, probs) -> np.ndarray:
    """Reference quantiles at ``probs``; ``nu0`` is anything with ``.quantile`` or a callable."""
    probs = np.asarray(probs, dtype=float)
    if isinstance(nu0, EmpiricalDistribution) or hasattr(nu0, "quantile"):
        out = nu0.quantile(probs)
    else:
        out = nu0(probs)
    return np.broadcast_to(np.asarray(out, dtype=float), probs.shape).copy()


# --------------------------------------------------------------------------- losses


def erm_loss(params: MlpParams, X, U, *, with_grad: bool = True):
    """Mean over samples of the squared norm of ``f(x) - u``."""
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float).reshape(X.shape[0], -1)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    pred = mlp_forward(params, X)
    resid = pred - U
    loss = float(np.sum(resid * resid) / X.shape[0])
    if not with_grad:
        return loss, None
    return loss, mlp_backward(params, X, 2.0 * resid / X.shape[0])


def w1_tail_loss(params: MlpParams, idx: IndexSets, targets, pool: np.ndarray, g: Observable,
                 *, with_grad: bool = True):
    """``mean_i |g(f(pool[I_i])) - F_nu0^-1(q_i)|`` with frozen indices.

    ``targets`` holds the reference quantiles aligned with the index sets.
    The subgradient of ``|.|`` at zero is taken as zero.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1)
    I = np.asarray(idx.input_indices)
    if I.size != targets.size:
        raise ValueError("index sets and targets are misaligned")
    if I.size == 0:
        raise ValueError("empty index set")
    if np.any(I < 0) or np.any(I >= pool.shape[0]):
        raise IndexError("pool index out of range")
    uniq, inverse = np.unique(I, return_inverse=True)
    Xs = pool[uniq]
    Us = np.atleast_2d(mlp_forward(params, Xs))
    U_rows = Us[inverse]
    vals, dg_du = g.frozen(U_rows, idx.component_indices)
    diff = vals - targets
    loss = float(np.mean(np.abs(diff)))
    if not with_grad:
        return loss, None
    w = np.sign(diff) / diff.size
    up_rows = dg_du * w[:, None]
    upstream = np.zeros_like(Us)
    np.add.at(upstream, inverse, up_rows)
    return loss, mlp_backward(params, Xs, upstream)


# --------------------------------------------------------------------------- loops


@dataclass
class TrainResult:
    params: MlpParams
    history: list[dict] = field(default_factory=list)
    trajectory: list[MlpParams] | None = None
    refresh_checks: list[bool] = field(default_factory=list)


def _batch_indices(rng, n: int, batch_size: int | None):
    if batch_size is None or batch_size >= n:
        return None
    return rng.choice(n, size=batch_size, replace=False)


def _check_finite(value: float, step: int) -> None:
    if not math.isfinite(value):
        raise TrainingDiverged(f"training diverged at step {step}")


def train_erm(dataset: Dataset, layer_dims: Sequence[int] | None = None, *, steps: int = 3000,
              lr: float = 1e-3, seed: int = 0, init: MlpParams | None = None,
              batch_size: int | None = None, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, keep_trajectory: bool = False,
              callback: Callable[[int, MlpParams], None] | None = None) -> TrainResult:
    """Minimise the squared-error loss with Adam from a Glorot init (or ``init``)."""
    params = init.copy() if init is not None else init_mlp(layer_dims, seed)
    state = AdamState.for_params(params, lr, beta1, beta2, eps)
    rng = np.random.default_rng([seed, 1])
    n = len(dataset)
    result = TrainResult(params, [], [params] if keep_trajectory else None)
    for k in range(steps):
        sel = _batch_indices(rng, n, batch_size)
        X = dataset.x if sel is None else dataset.x[sel]
        U = dataset.u if sel is None else dataset.u[sel]
        loss, grads = erm_loss(params, X, U)
        _check_finite(loss, k)
        result.history.append({"step": k, "erm_loss": loss, "tail_w1_loss": float("nan"),
                               "total": loss, "refresh_flag": 0})
        try:
            params, state = adam_step(params, grads, state)
        except FloatingPointError as exc:
            raise TrainingDiverged(f"training diverged at step {k}: {exc}") from None
        if keep_trajectory:
            result.trajectory.append(params)
        if callback is not None:
            callback(k + 1, params)
    result.params = params
    return result


def train_iict(dataset: Dataset, pool: np.ndarray, Q: QuantileSet, nu0, config: EtaConfig,
               pretrained: MlpParams, g: Observable, *, keep_trajectory: bool = False,
               check_refresh: bool = False,
               callback: Callable[[int, MlpParams], None] | None = None) -> TrainResult:
    """Run ``config.steps`` Adam steps on ``erm + lam * tail_w1`` from an ERM estimator.

    Index sets are computed once at the start and refreshed whenever the
    iteration counter hits a multiple of ``config.omega``. The optimizer
    state starts fresh.
    """
    pool = np.asarray(pool, dtype=float)
    params = pretrained.copy()
    state = AdamState.for_params(params, config.lr, config.beta1, config.beta2, config.eps)
    rng = np.random.default_rng([config.seed, 1])
    targets = reference_quantiles(nu0, Q.probs)
    n = len(dataset)
    result = TrainResult(params, [], [params] if keep_trajectory else None)

    def refresh(p):
        idx = update_index(p, Q, pool, g)
        if check_refresh:
            result.refresh_checks.append(refresh_is_idempotent(p, Q, pool, g, idx))
        return idx

    idx = refresh(params)
    refreshed = True
    for k in range(config.steps):
        sel = _batch_indices(rng, n, config.batch_size)
        X = dataset.x if sel is None else dataset.x[sel]
        U = dataset.u if sel is None else dataset.u[sel]
        e_loss, grads = erm_loss(params, X, U)
        t_loss, t_grads = w1_tail_loss(params, idx, targets, pool, g, with_grad=config.lam > 0)
        total = e_loss + config.lam * t_loss
        _check_finite(total, k)
        if config.lam > 0:
            grads = [a + config.lam * b for a, b in zip(grads, t_grads)]
        result.history.append({"step": k, "erm_loss": e_loss, "tail_w1_loss": t_loss,
                               "total": total, "refresh_flag": int(refreshed)})
        try:
            params, state = adam_step(params, grads, state)
        except FloatingPointError as exc:
            raise TrainingDiverged(f"training diverged at step {k}: {exc}") from None
        if keep_trajectory:
            result.trajectory.append(params)
        if callback is not None:
            callback(k + 1, params)
        refreshed = False
        done = k + 1
        if done % config.omega == 0 and done < config.steps:
            idx = refresh(params)
            refreshed = True
    result.params = params
    return result


LOG_COLUMNS = ("step", "erm_loss", "tail_w1_loss", "total", "refresh_flag")


def write_log_csv(path, history: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for row in history:
            w.writerow([row["step"], repr(row["erm_loss"]), repr(row["tail_w1_loss"]),
                        repr(row["total"]), row["refresh_flag"]])

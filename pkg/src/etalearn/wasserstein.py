"""One-dimensional Wasserstein distances and the push-forward bound checks.

All distances use the quantile representation
``W_p^p = int_0^1 |F1^-1(q) - F2^-1(q)|^p dq``, which for empirical laws
reduces to monotone (sorted) matching.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .distributions import EmpiricalDistribution, QuantileSet

ORACLE_MAX_N = 7


def _sorted(d) -> np.ndarray:
    if isinstance(d, EmpiricalDistribution):
        return d.samples
    arr = np.asarray(d, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError("empty distribution")
    return np.sort(arr)


def _paired(y1, y2) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y1, dtype=float).reshape(-1)
    b = np.asarray(y2, dtype=float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty evaluations")
    if a.size != b.size:
        raise ValueError("paired evaluations must have equal length")
    return a, b


def _quantile_segments(a: np.ndarray, b: np.ndarray):
    """Segment lengths and the two quantile values on each piece of (0, 1)."""
    n, m = a.size, b.size
    if n == m:
        return np.full(n, 1.0 / n), a, b
    cuts = np.union1d(np.arange(n + 1) / n, np.arange(m + 1) / m)
    widths = np.diff(cuts)
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    ia = np.clip(np.ceil(mids * n).astype(np.int64), 1, n) - 1
    ib = np.clip(np.ceil(mids * m).astype(np.int64), 1, m) - 1
    return widths, a[ia], b[ib]


def w1_empirical(d1, d2) -> float:
    """Exact W1 between two empirical laws of any sizes."""
    a, b = _sorted(d1), _sorted(d2)
    w, qa, qb = _quantile_segments(a, b)
    if a.size == b.size:
        return float(np.mean(np.abs(qa - qb)))
    return float(np.sum(w * np.abs(qa - qb)))


def wp_empirical(d1, d2, p: float) -> float:
    """Exact W_p between two empirical laws, ``p >= 1``."""
    if not p >= 1:
        raise ValueError("Wasserstein order p must be >= 1")
    a, b = _sorted(d1), _sorted(d2)
    w, qa, qb = _quantile_segments(a, b)
    return float(np.sum(w * np.abs(qa - qb) ** p) ** (1.0 / p))


def w1_bruteforce_oracle(d1, d2) -> float:
    """Minimum mean matching cost over all bijections. Test oracle, n <= 7."""
    a = np.asarray(d1.samples if isinstance(d1, EmpiricalDistribution) else d1, dtype=float).reshape(-1)
    b = np.asarray(d2.samples if isinstance(d2, EmpiricalDistribution) else d2, dtype=float).reshape(-1)
    if a.size != b.size:
        raise ValueError("oracle needs equal sizes")
    if a.size == 0:
        raise ValueError("empty distribution")
    if a.size > ORACLE_MAX_N:
        raise ValueError("oracle size limit")
    best = math.inf
    for perm in itertools.permutations(range(b.size)):
        best = min(best, float(np.mean(np.abs(a - b[list(perm)]))))
    return best


QuantileFn = Callable[[np.ndarray], np.ndarray]


def _levels(Q) -> np.ndarray:
    probs = Q.probs if isinstance(Q, QuantileSet) else np.asarray(Q, dtype=float).reshape(-1)
    if probs.size == 0:
        raise ValueError("quantile set is empty")
    return probs


def w1_quantile_mc(qf_a: QuantileFn, qf_b: QuantileFn, Q) -> float:
    """Average of ``|qf_a(q) - qf_b(q)|`` over the levels of ``Q``."""
    probs = _levels(Q)
    va = np.broadcast_to(np.asarray(qf_a(probs), dtype=float), probs.shape)
    vb = np.broadcast_to(np.asarray(qf_b(probs), dtype=float), probs.shape)
    return float(np.mean(np.abs(va - vb)))


def w1_tail(qf_a: QuantileFn, qf_b: QuantileFn, Q: QuantileSet) -> float:
    """Tail proxy of W1: the quantile average restricted to levels >= tau."""
    if not isinstance(Q, QuantileSet) or Q.tau <= 0:
        raise ValueError("w1_tail needs a QuantileSet with tau > 0")
    return w1_quantile_mc(qf_a, qf_b, Q)


def w1_lower_bound_mean_diff(y1_vals, y2_vals) -> float:
    a, b = _paired(y1_vals, y2_vals)
    return abs(float(np.mean(a)) - float(np.mean(b)))


def w1_upper_bound_coupled(y1_vals, y2_vals) -> float:
    a, b = _paired(y1_vals, y2_vals)
    return float(np.mean(np.abs(a - b)))


def _slack(value: float) -> float:
    return 1e-9 * (1.0 + abs(value))


@dataclass
class BoundReport:
    lower_mean_diff: float
    w1: float
    upper_coupled_mean_abs: float
    satisfied: bool

    def to_dict(self) -> dict:
        return asdict(self)


def check_w1_sandwich(y1_vals, y2_vals, w1_fn=w1_empirical) -> BoundReport:
    """``|E y1 - E y2| <= W1(y1#mu, y2#mu) <= E|y1 - y2|`` on paired evaluations."""
    lo = w1_lower_bound_mean_diff(y1_vals, y2_vals)
    hi = w1_upper_bound_coupled(y1_vals, y2_vals)
    w1 = float(w1_fn(y1_vals, y2_vals))
    tol = _slack(w1)
    ok = lo <= w1 + tol and w1 <= hi + tol
    return BoundReport(lo, w1, hi, bool(ok))


@dataclass
class WpBoundReport:
    p: float
    wp: float
    mean_diff_lower: float
    moment_lower: float
    coupled_upper: float
    satisfied: bool

    def to_dict(self) -> dict:
        return asdict(self)


def check_wp_bounds(y1_vals, y2_vals, p: float, wp_fn=wp_empirical) -> WpBoundReport:
    """Evaluate three W_p bounds on paired evaluations of two maps.

    * ``W_p >= |E[y1 - y2]|``                               (Jensen)
    * ``W_p >= |(E|y1|^p)^(1/p) - (E|y2|^p)^(1/p)|``        (triangle via delta_0)
    * ``W_p^p <= E|y1 - y2|^p``                             (identity coupling)

    ``coupled_upper`` is reported on the ``W_p^p`` scale.
    """
    if not p >= 1:
        raise ValueError("Wasserstein order p must be >= 1")
    a, b = _paired(y1_vals, y2_vals)
    wp = float(wp_fn(a, b, p))
    mean_lo = abs(float(np.mean(a - b)))
    mom_lo = abs(float(np.mean(np.abs(a) ** p)) ** (1.0 / p) - float(np.mean(np.abs(b) ** p)) ** (1.0 / p))
    upper = float(np.mean(np.abs(a - b) ** p))
    tol = _slack(wp)
    ok = (mean_lo <= wp + tol) and (mom_lo <= wp + tol) and (wp ** p <= upper + _slack(upper))
    return WpBoundReport(float(p), wp, mean_lo, mom_lo, upper, bool(ok))


def subexponential_moment_lower(y1_vals, y2_vals, p: float) -> float:
    """``|E|y1|^p - E|y2|^p| / (2 p^2 / (p - 1))^p``, for ``p > 1``."""
    if not p > 1:
        raise ValueError("needs p > 1")
    a, b = _paired(y1_vals, y2_vals)
    num = abs(float(np.mean(np.abs(a) ** p)) - float(np.mean(np.abs(b) ** p)))
    return num / (2.0 * p * p / (p - 1.0)) ** p

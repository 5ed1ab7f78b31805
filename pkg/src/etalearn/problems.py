"""Analytic toy benchmarks: Gaussian-bump maps on a wide isotropic Gaussian input law."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .distributions import EmpiricalDistribution, empirical_quantile


class Mode(str, Enum):
    ONE_D = "toy1d"
    TWO_D = "toy2d"


@dataclass(frozen=True)
class GaussianBump:
    """``A / (2 pi sqrt(s)) * exp(-|x - c|^2 / (2 s))``."""

    amplitude: float
    center: tuple[float, float]
    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("bump variance parameter must be positive")

    def __call__(self, x1, x2):
        c1, c2 = self.center
        r2 = (np.asarray(x1, dtype=float) - c1) ** 2 + (np.asarray(x2, dtype=float) - c2) ** 2
        return self.amplitude / (2.0 * math.pi * math.sqrt(self.s)) * np.exp(-r2 / (2.0 * self.s))


DEFAULT_BUMPS: tuple[GaussianBump, ...] = (
    GaussianBump(1.5, (2.0, 2.0), 0.5),
    GaussianBump(1.5, (-1.0, -1.0), 0.7),
    GaussianBump(1.0, (2.0, -2.0), 0.3),
    GaussianBump(0.5, (0.0, 1.0), 0.9),
    GaussianBump(1.25, (0.5, -0.5), 0.6),
)


def _bump_sum(bumps, x1, x2):
    total = 0.0
    for b in bumps:
        total = total + b(x1, x2)
    return total


def toy1d_y(x1, x2):
    """Five-bump scalar map of the 2D-to-1D benchmark."""
    out = _bump_sum(DEFAULT_BUMPS, x1, x2)
    return float(out) if np.ndim(out) == 0 else out


def toy2d_u(x1, x2):
    """State map of the 2D-to-2D benchmark: ``(y(x), -0.1 sin(pi x1/3) sin(pi x2/4))``."""
    u1 = toy1d_y(x1, x2)
    u2 = -0.1 * np.sin(math.pi * np.asarray(x1, dtype=float) / 3.0) * np.sin(math.pi * np.asarray(x2, dtype=float) / 4.0)
    if np.ndim(u2) == 0:
        return float(u1), float(u2)
    return u1, u2


def toy2d_g(u1, u2):
    """Observable ``2|u1| + |u2|/2``."""
    out = 2.0 * np.abs(u1) + 0.5 * np.abs(u2)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ToyProblemSpec:
    bumps: tuple[GaussianBump, ...] = DEFAULT_BUMPS
    input_sigma2: float = 10.0
    mode: Mode = Mode.ONE_D

    def __post_init__(self):
        if not self.bumps:
            raise ValueError("need at least one bump")
        if not self.input_sigma2 > 0:
            raise ValueError("input variance must be positive")
        object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def state_dim(self) -> int:
        return 1 if self.mode is Mode.ONE_D else 2

    def y1(self, X: np.ndarray) -> np.ndarray:
        return _bump_sum(self.bumps, X[:, 0], X[:, 1])

    def state(self, X) -> np.ndarray:
        """States ``u(x)`` shaped ``(N, state_dim)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        u1 = self.y1(X)
        if self.mode is Mode.ONE_D:
            return u1[:, None]
        u2 = -0.1 * np.sin(math.pi * X[:, 0] / 3.0) * np.sin(math.pi * X[:, 1] / 4.0)
        return np.column_stack([u1, u2])

    def observable(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float).reshape(len(U), -1)
        if self.mode is Mode.ONE_D:
            return U[:, 0].copy()
        return toy2d_g(U[:, 0], U[:, 1])

    def observe(self, X) -> np.ndarray:
        """Ground-truth observable ``g(u(x))``."""
        return self.observable(self.state(X))


TOY1D = ToyProblemSpec(mode=Mode.ONE_D)
TOY2D = ToyProblemSpec(mode=Mode.TWO_D)


def get_problem(name: str) -> ToyProblemSpec:
    return {"toy1d": TOY1D, "toy2d": TOY2D}[name]


def sample_inputs(n: int, sigma2: float, seed: int) -> np.ndarray:
    """``n`` draws from ``N(0, sigma2 I_2)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, math.sqrt(sigma2), size=(int(n), 2))


@dataclass
class Dataset:
    """Aligned inputs ``x`` (N, d), states ``u`` (N, m) and observables ``y`` (N,)."""

    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.u = np.asarray(self.u, dtype=float).reshape(self.x.shape[0], -1)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if not (self.x.shape[0] == self.u.shape[0] == self.y.shape[0]):
            raise ValueError("dataset arrays must have equal length")

    def __len__(self) -> int:
        return int(self.x.shape[0])

    def header(self) -> list[str]:
        xs = [f"x{i + 1}" for i in range(self.x.shape[1])]
        us = [f"u{i + 1}" for i in range(self.u.shape[1])]
        return xs + us + ["y"]

    def to_csv(self, path) -> None:
        rows = np.column_stack([self.x, self.u, self.y])
        with open(path, "w") as fh:
            fh.write(",".join(self.header()) + "\n")
            for row in rows.tolist():
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if not header or header[-1] != "y":
                raise ValueError(f"{path}: header must end with column 'y'")
            body = [line for line in fh if line.strip()]
        xs = [i for i, h in enumerate(header) if h.startswith("x")]
        us = [i for i, h in enumerate(header) if h.startswith("u")]
        if not xs or len(xs) + len(us) + 1 != len(header):
            raise ValueError(f"{path}: unexpected columns {header}")
        try:
            data = np.array([[float(v) for v in line.split(",")] for line in body], dtype=float)
        except ValueError as exc:
            raise ValueError(f"{path}: malformed row ({exc})") from None
        if data.size == 0 or data.shape[1] != len(header):
            raise ValueError(f"{path}: malformed rows")
        u = data[:, us] if us else data[:, [-1]]
        return cls(data[:, xs], u, data[:, -1])


def write_inputs_csv(path, X: np.ndarray) -> None:
    X = np.atleast_2d(X)
    with open(path, "w") as fh:
        fh.write(",".join(f"x{i + 1}" for i in range(X.shape[1])) + "\n")
        for row in X.tolist():
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_inputs_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not header or not all(h.startswith("x") for h in header):
            raise ValueError(f"{path}: expected x-columns header")
        try:
            rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
        except ValueError as exc:
            raise ValueError(f"{path}: malformed row ({exc})") from None
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(header) or X.shape[0] == 0:
        raise ValueError(f"{path}: malformed input rows")
    return X


def build_training_set(n: int, exclusion_center=(2.0, -2.0), exclusion_radius: float = 1.5,
                       sigma2: float = 10.0, seed: int = 0, problem: ToyProblemSpec = TOY1D,
                       max_observable: float | None = None, chunk: int = 4096) -> Dataset:
    """Rejection-sample ``n`` inputs that avoid the targeted extreme region.

    A point is rejected when it lies within ``exclusion_radius`` of
    ``exclusion_center`` or, if ``max_observable`` is given, when its true
    observable is at or above that ceiling.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if exclusion_radius < 0:
        raise ValueError("exclusion radius must be >= 0")
    rng = np.random.default_rng(seed)
    center = np.asarray(exclusion_center, dtype=float)
    kept: list[np.ndarray] = []
    have = drawn = 0
    while have < n:
        X = rng.normal(0.0, math.sqrt(sigma2), size=(chunk, 2))
        drawn += chunk
        keep = np.linalg.norm(X - center, axis=1) > exclusion_radius
        if max_observable is not None:
            keep &= problem.observe(X) < max_observable
        kept.append(X[keep])
        have += int(keep.sum())
        if drawn >= 100_000 and have / drawn < 1e-3:
            raise ValueError("exclusion region too large")
    X = np.concatenate(kept)[:n]
    U = problem.state(X)
    return Dataset(X, U, problem.observable(U), meta={"accepted_fraction": have / drawn})


def reference_distribution(problem: ToyProblemSpec, n_mc: int, seed: int, chunk: int = 250_000) -> EmpiricalDistribution:
    """Empirical law of the true observable over ``n_mc`` Monte-Carlo inputs."""
    if n_mc < 10_000:
        raise ValueError("reference distribution needs n_mc >= 1e4")
    X = sample_inputs(n_mc, problem.input_sigma2, seed)
    vals = np.concatenate([problem.observe(X[i:i + chunk]) for i in range(0, n_mc, chunk)])
    return EmpiricalDistribution.from_samples(vals)


def training_ceiling(reference: EmpiricalDistribution, q: float) -> float:
    return float(empirical_quantile(reference, q))

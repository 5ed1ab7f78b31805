"""Reference distributions: empirical quantiles, quantile-level sets, KDE and the GEV family."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

# |kappa| at or below this uses the Gumbel formulas
KAPPA_EPS = 1e-8
EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Sorted sample set acting as a one-dimensional law.

    Construct with ``EmpiricalDistribution.from_samples`` unless the values
    are already sorted; the constructor validates but does not sort.
    """

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float).reshape(-1)
        if arr.size == 0:
            raise ValueError("empty distribution")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        if np.any(np.diff(arr) < 0):
            raise ValueError("samples must be sorted ascending")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def from_samples(cls, values: Iterable[float]) -> "EmpiricalDistribution":
        arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
        if arr.size == 0:
            raise ValueError("empty distribution")
        return cls(np.sort(arr.reshape(-1), kind="stable"))

    @property
    def n(self) -> int:
        return int(self.samples.size)

    def quantile(self, q):
        return empirical_quantile(self, q)

    def __len__(self) -> int:
        return self.n

    def to_csv(self, path) -> None:
        write_values_csv(path, self.samples)

    @classmethod
    def from_csv(cls, path) -> "EmpiricalDistribution":
        return cls.from_samples(read_values_csv(path))


def order_statistic_rank(q, n: int):
    """1-based rank ceil(q*n), clamped to [1, n]."""
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
        raise ValueError("probabilities must lie in [0, 1]")
    return np.clip(np.ceil(q * n).astype(np.int64), 1, n)


def empirical_quantile(dist, q):
    """Order-statistic quantile ``x_(ceil(q n))`` of an empirical law.

    Parameters
    ----------
    dist : EmpiricalDistribution or array-like
        Sample set; plain arrays are sorted first.
    q : float or array-like
        Probability level(s) in [0, 1]. ``q = 0`` returns the minimum.

    Returns
    -------
    float or ndarray
    """
    if not isinstance(dist, EmpiricalDistribution):
        arr = np.asarray(dist, dtype=float).reshape(-1)
        if arr.size == 0:
            raise ValueError("empty distribution")
        dist = EmpiricalDistribution.from_samples(arr)
    ranks = order_statistic_rank(q, dist.n)
    out = dist.samples[ranks - 1]
    return float(out) if np.ndim(out) == 0 else out


def linsp(a: float, b: float, n: int) -> np.ndarray:
    """``n`` evenly spaced points from ``a`` to ``b`` inclusive."""
    if n < 2:
        raise ValueError("linsp needs n >= 2")
    if a > b:
        raise ValueError("linsp needs a <= b")
    out = a + np.arange(n) * ((b - a) / (n - 1))
    out[-1] = b
    return out


@dataclass(frozen=True, eq=False)
class QuantileSet:
    """Strictly increasing probability levels with a tail cutoff ``tau``."""

    probs: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        if p.size == 0:
            raise ValueError("quantile set is empty")
        if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
            raise ValueError("quantile levels must lie in [0, 1]")
        if np.any(np.diff(p) <= 0):
            raise ValueError("quantile levels must be strictly increasing")
        if not 0 <= self.tau < 1:
            raise ValueError("tau must lie in [0, 1)")
        if self.tau > 0 and p[0] < self.tau:
            raise ValueError("quantile levels below tau")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "tau", float(self.tau))

    def __len__(self) -> int:
        return int(self.probs.size)

    def restrict(self, tau: float) -> "QuantileSet":
        """Levels at or above ``tau`` with ``tau`` recorded as the cutoff."""
        return QuantileSet(self.probs[self.probs >= tau], tau=tau)


def build_quantile_set(blocks: Sequence[tuple[float, float, int]], tau: float = 0.0) -> QuantileSet:
    """Concatenate ``linsp`` blocks, drop exact duplicates and sort."""
    parts = [linsp(a, b, int(n)) for a, b, n in blocks]
    if not parts:
        raise ValueError("no blocks given")
    values = np.concatenate(parts)
    if np.any((values < 0) | (values > 1)):
        raise ValueError("quantile levels must lie in [0, 1]")
    return QuantileSet(np.unique(values), tau=tau)


# Probability-level blocks used by the two toy problems.
TOY1D_BLOCKS: list[tuple[float, float, int]] = [
    (0.0, 1e-4, 10),
    (1e-4, 1e-3, 10),
    (1e-3, 1e-2, 10),
    (1e-2, 1e-1, 9),
    (1e-1, 1 - 1e-1, 20),
    (1 - 1e-1, 1 - 1e-2, 21),
    (1 - 1e-2, 1 - 1e-3, 21),
    (1 - 1e-3, 1 - 1e-4, 21),
    (1 - 1e-4, 1 - 1e-5, 21),
    (1 - 1e-5, 1 - 1e-6, 21),
    (1 - 1e-6, 1 - 1e-7, 21),
]

TOY2D_BLOCKS: list[tuple[float, float, int]] = [
    (0.0, 1 - 1e-1, 41),
    (1 - 1e-1, 1 - 1e-2, 21),
    (1 - 1e-2, 1 - 1e-3, 21),
    (1 - 1e-3, 1 - 1e-4, 21),
    (1 - 1e-4, 1 - 1e-5, 21),
    (1 - 1e-5, 1 - 1e-6, 21),
    (1 - 1e-6, 1 - 1e-7, 21),
]


# --------------------------------------------------------------------------- GEV


@dataclass(frozen=True)
class GevdParams:
    """GEV shape ``kappa``, location ``zeta`` and scale ``sigma``.

    ``kappa > 0`` is the heavy-tailed (Frechet) branch. Note that
    ``scipy.stats.genextreme`` uses the opposite sign for its shape ``c``;
    use :meth:`from_scipy` to convert.
    """

    kappa: float
    zeta: float
    sigma: float

    def __post_init__(self):
        for name in ("kappa", "zeta", "sigma"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def from_scipy(cls, c: float, loc: float, scale: float) -> "GevdParams":
        return cls(kappa=-c, zeta=loc, sigma=scale)

    def to_scipy(self) -> tuple[float, float, float]:
        return -self.kappa, self.zeta, self.sigma

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "zeta": self.zeta, "sigma": self.sigma}


@dataclass(frozen=True)
class TruncatedGevd:
    """GEV law with its upper tail of probability ``gamma`` removed."""

    base: GevdParams
    gamma: float
    cutoff: float = field(default=float("nan"))

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        expected = gevd_quantile(self.base, 1.0 - self.gamma)
        if math.isnan(self.cutoff):
            object.__setattr__(self, "cutoff", expected)
        elif abs(self.cutoff - expected) > 1e-9 * max(1.0, abs(expected)):
            raise ValueError(f"cutoff {self.cutoff} inconsistent with gamma (expected {expected})")

    def quantile(self, q):
        return truncated_gevd_quantile(self, q)

    def to_dict(self) -> dict:
        return {**self.base.to_dict(), "gamma": self.gamma, "cutoff": self.cutoff}


def _gumbel(kappa: float) -> bool:
    return abs(kappa) <= KAPPA_EPS


def gevd_pdf(params: GevdParams, y):
    """GEV density; zero outside the support."""
    y = np.asarray(y, dtype=float)
    z = (y - params.zeta) / params.sigma
    if _gumbel(params.kappa):
        with np.errstate(over="ignore"):
            out = np.exp(-z - np.exp(-z)) / params.sigma
    else:
        k = params.kappa
        t = 1.0 + k * z
        inside = t > 0
        ts = np.where(inside, t, 1.0)
        with np.errstate(over="ignore", divide="ignore"):
            dens = ts ** (-(1.0 + 1.0 / k)) * np.exp(-(ts ** (-1.0 / k))) / params.sigma
        out = np.where(inside, dens, 0.0)
        out = np.where(np.isfinite(out), out, 0.0)
    return float(out) if out.ndim == 0 else out


def gevd_cdf(params: GevdParams, y):
    y = np.asarray(y, dtype=float)
    z = (y - params.zeta) / params.sigma
    if _gumbel(params.kappa):
        out = np.exp(-np.exp(-z))
    else:
        k = params.kappa
        t = 1.0 + k * z
        with np.errstate(divide="ignore", over="ignore"):
            inner = np.where(t > 0, np.where(t > 0, t, 1.0) ** (-1.0 / k), np.inf if k > 0 else 0.0)
        out = np.exp(-inner)
    return float(out) if out.ndim == 0 else out


def gevd_quantile(params: GevdParams, q):
    """Closed-form GEV quantile for ``q`` in (0, 1)."""
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q >= 1)) or np.any(np.isnan(q)):
        raise ValueError("GEV quantile needs q in (0, 1)")
    w = -np.log(q)
    if _gumbel(params.kappa):
        out = params.zeta - params.sigma * np.log(w)
    else:
        k = params.kappa
        out = params.zeta + (params.sigma / k) * np.expm1(-k * np.log(w))
    return float(out) if out.ndim == 0 else out


def truncated_gevd_quantile(tg: TruncatedGevd, q):
    """Quantile of the truncated law: the base quantile at ``q (1 - gamma)``."""
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q > 1)) or np.any(np.isnan(q)):
        raise ValueError("truncated GEV quantile needs q in (0, 1]")
    return gevd_quantile(tg.base, q * (1.0 - tg.gamma))


def gevd_nll(params: GevdParams, samples) -> float:
    """Negative log-likelihood; ``inf`` when any sample lies outside the support."""
    y = np.asarray(samples, dtype=float)
    z = (y - params.zeta) / params.sigma
    n = y.size
    if _gumbel(params.kappa):
        return float(n * math.log(params.sigma) + np.sum(z) + np.sum(np.exp(-z)))
    k = params.kappa
    t = 1.0 + k * z
    if np.any(t <= 0):
        return math.inf
    logt = np.log(t)
    val = n * math.log(params.sigma) + (1.0 + 1.0 / k) * np.sum(logt) + np.sum(np.exp(-logt / k))
    return float(val) if math.isfinite(val) else math.inf


def gumbel_moment_init(samples) -> GevdParams:
    y = np.asarray(samples, dtype=float)
    sigma0 = float(np.std(y, ddof=1)) * math.sqrt(6.0) / math.pi
    zeta0 = float(np.mean(y)) - EULER_GAMMA * sigma0
    return GevdParams(kappa=0.1, zeta=zeta0, sigma=sigma0)


def gevd_fit_mle(samples, *, xatol: float = 1e-9, fatol: float = 1e-10, maxiter: int = 20000) -> GevdParams:
    """Maximum-likelihood GEV fit by Nelder-Mead over ``(kappa, zeta, log sigma)``.

    Starts from Gumbel moment estimates with ``kappa = 0.1``. Raises
    ``ValueError("degenerate sample")`` for zero-variance input.
    """
    y = np.asarray(samples, dtype=float).reshape(-1)
    if y.size < 2 or not np.all(np.isfinite(y)):
        raise ValueError("need at least two finite samples")
    if np.ptp(y) == 0:
        raise ValueError("degenerate sample")
    init = gumbel_moment_init(y)
    if not math.isfinite(gevd_nll(init, y)):
        init = GevdParams(0.0, init.zeta, init.sigma)
    scale = float(np.std(y))

    def objective(theta):
        k, zeta_n, s = theta
        if not (math.isfinite(k) and math.isfinite(s)) or abs(s) > 700:
            return math.inf
        return gevd_nll(GevdParams(k, zeta_n * scale, math.exp(s)), y) / y.size

    # location is optimised in units of the sample spread to keep the simplex well scaled
    x0 = np.array([init.kappa, init.zeta / scale, math.log(init.sigma)])
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"xatol": xatol, "fatol": fatol, "maxiter": maxiter, "maxfev": 4 * maxiter})
    # one restart from the optimum shakes off a collapsed simplex
    res = minimize(objective, res.x, method="Nelder-Mead",
                   options={"xatol": xatol, "fatol": fatol, "maxiter": maxiter, "maxfev": 4 * maxiter})
    if not math.isfinite(res.fun):
        raise RuntimeError("GEV fit failed to find a feasible optimum")
    k, zeta_n, s = res.x
    return GevdParams(float(k), float(zeta_n * scale), math.exp(float(s)))


def gevd_to_json(obj, path=None) -> str:
    payload = obj.to_dict()
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def gevd_from_json(source) -> GevdParams | TruncatedGevd:
    """Parse ``{kappa, zeta, sigma, gamma?, cutoff?}`` from a path, string or dict."""
    if isinstance(source, dict):
        data = source
    else:
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
        data = json.loads(text)
    allowed = {"kappa", "zeta", "sigma", "gamma", "cutoff"}
    extra = set(data) - allowed
    if extra:
        raise ValueError(f"unknown GEV keys: {sorted(extra)}")
    base = GevdParams(data["kappa"], data["zeta"], data["sigma"])
    if "gamma" in data and data["gamma"] is not None:
        return TruncatedGevd(base, float(data["gamma"]), float(data.get("cutoff", float("nan"))))
    return base


# --------------------------------------------------------------------------- KDE


def scott_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < 2:
        raise ValueError("Scott's rule needs at least two samples")
    return float(np.std(x, ddof=1) * x.size ** (-0.2))


def kde_pdf(samples, grid, bandwidth="auto", *, chunk: int = 2**22) -> np.ndarray:
    """Gaussian kernel density estimate evaluated on ``grid``.

    ``bandwidth="auto"`` applies Scott's rule (sample std times n^-1/5).
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    g = np.asarray(grid, dtype=float).reshape(-1)
    if x.size == 0 or g.size == 0:
        raise ValueError("kde needs nonempty samples and grid")
    if isinstance(bandwidth, str):
        if bandwidth.lower() != "auto":
            raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
        h = scott_bandwidth(x)
    else:
        h = float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    out = np.zeros(g.size)
    step = max(1, chunk // g.size)
    for start in range(0, x.size, step):
        z = (g[:, None] - x[None, start:start + step]) / h
        out += np.exp(-0.5 * z * z).sum(axis=1)
    return out / (x.size * h * math.sqrt(2.0 * math.pi))


# --------------------------------------------------------------------------- CSV


def write_values_csv(path, values, header: str | None = "value") -> None:
    """Optional header, then one value per line in shortest round-trip repr."""
    arr = np.asarray(values, dtype=float).reshape(-1)
    with open(path, "w") as fh:
        if header is not None:
            fh.write(header + "\n")
        fh.write("\n".join(repr(float(v)) for v in arr.tolist()))
        fh.write("\n")


def read_values_csv(path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            try:
                values.append(float(s.split(",")[0]))
            except ValueError:
                if lineno == 1 and not values:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: not a number: {s!r}") from None
    if not values:
        raise ValueError(f"{path}: no values")
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{path}: non-finite values")
    return arr

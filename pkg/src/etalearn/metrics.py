"""Evaluation statistics: threshold statistics, data-consistency diagnostics and PDF exports."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Mapping

import numpy as np

from .distributions import kde_pdf

# below this the signed extreme error is treated as zero
RATIO_GUARD = 1e-15


def conditional_mean(field, t: float) -> float:
    """Mean of the values at or above ``t``."""
    u = np.asarray(field, dtype=float).reshape(-1)
    if u.size == 0:
        raise ValueError("empty field")
    mask = u >= t
    if not mask.any():
        raise ValueError("empty conditional set")
    return math.fsum(u[mask]) / int(mask.sum())


def weighted_coverage(field, t: float) -> float:
    """Fraction of the total field mass carried by values at or above ``t``."""
    u = np.asarray(field, dtype=float).reshape(-1)
    if u.size == 0:
        raise ValueError("empty field")
    if np.any(u < 0):
        raise ValueError("weighted coverage needs a nonnegative field")
    total = math.fsum(u)
    if total <= 0:
        raise ValueError("zero total mass")
    return math.fsum(u[u >= t]) / total


@dataclass
class ConsistencyReport:
    err_bulk_signed: float
    err_extreme_signed: float
    err_bulk_abs: float
    err_extreme_abs: float
    C_tilde_hat: float
    C_hat_hat: float
    K_hat: float
    ratios_defined: bool
    n_eval: int
    n_extreme: int
    t_star: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        d = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in self.to_dict().items()}
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


def _mc_integral(values: np.ndarray, mask: np.ndarray, n: int) -> float:
    # Monte-Carlo estimate of the integral of ``values`` over the masked region
    return math.fsum(values[mask]) / n


def data_consistency_report(true_map: Callable, estimator: Callable, t_star: float, eval_inputs) -> ConsistencyReport:
    """Split ``eval_inputs`` at ``y_true >= t_star`` and estimate the four error integrals.

    ``C_tilde_hat`` is bulk-signed over extreme-signed (absolute values),
    ``C_hat_hat`` bulk-abs over extreme-abs and ``K_hat`` extreme-abs over
    extreme-signed. Ratios are NaN with ``ratios_defined = False`` when the
    relevant denominator vanishes.
    """
    X = np.asarray(eval_inputs, dtype=float)
    y = np.asarray(true_map(X), dtype=float).reshape(-1)
    yh = np.asarray(estimator(X), dtype=float).reshape(-1)
    if y.shape != yh.shape:
        raise ValueError("true map and estimator disagree in output length")
    n = y.size
    ext = y >= t_star
    if not ext.any():
        raise ValueError("extreme set empty at this threshold")
    r = y - yh
    bulk = ~ext
    bs = _mc_integral(r, bulk, n)
    es = _mc_integral(r, ext, n)
    ba = _mc_integral(np.abs(r), bulk, n)
    ea = _mc_integral(np.abs(r), ext, n)
    defined = abs(es) >= RATIO_GUARD
    nan = float("nan")
    c_tilde = abs(bs) / abs(es) if defined else nan
    k_hat = ea / abs(es) if defined else nan
    c_hat = ba / ea if ea >= RATIO_GUARD else nan
    return ConsistencyReport(bs, es, ba, ea, c_tilde, c_hat, k_hat, bool(defined), n, int(ext.sum()), float(t_star))


def pdf_grid(sample_sets: Mapping[str, np.ndarray], n_grid: int = 512, pad: float = 0.05,
             lo: float | None = None, hi: float | None = None) -> np.ndarray:
    """Common evaluation grid spanning all sets, padded by ``pad`` of the range."""
    allv = np.concatenate([np.asarray(v, dtype=float).reshape(-1) for v in sample_sets.values()])
    a = float(allv.min()) if lo is None else lo
    b = float(allv.max()) if hi is None else hi
    span = (b - a) or 1.0
    if lo is None:
        a -= pad * span
    if hi is None:
        b += pad * span
    return np.linspace(a, b, n_grid)


def pdf_compare_export(sample_sets: Mapping[str, np.ndarray], path=None, *, grid=None, n_grid: int = 512,
                       bandwidth="auto") -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """KDE of each named sample set on one shared grid; optionally written as CSV."""
    if not sample_sets:
        raise ValueError("no sample sets given")
    for name, v in sample_sets.items():
        if np.asarray(v).size == 0:
            raise ValueError(f"sample set {name!r} is empty")
    g = pdf_grid(sample_sets, n_grid) if grid is None else np.asarray(grid, dtype=float)
    cols = {name: kde_pdf(v, g, bandwidth) for name, v in sample_sets.items()}
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["grid", *cols])
            for i in range(g.size):
                w.writerow([repr(float(g[i])), *(repr(float(c[i])) for c in cols.values())])
    return g, cols


def threshold_table(fields: Mapping[str, np.ndarray], thresholds, stat: Callable[[np.ndarray, float], float]):
    """Rows ``(t, stat_name1, ...)``; undefined entries become NaN."""
    rows = []
    for t in np.asarray(thresholds, dtype=float):
        row = [float(t)]
        for v in fields.values():
            try:
                row.append(stat(v, float(t)))
            except ValueError:
                row.append(float("nan"))
        rows.append(row)
    return rows

"""Command-line driver: data generation, ERM / eta training, evaluation, bound checks and GEVD tools.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure,
4 property violation.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from .distributions import (
    TOY1D_BLOCKS,
    TOY2D_BLOCKS,
    EmpiricalDistribution,
    GevdParams,
    TruncatedGevd,
    build_quantile_set,
    gevd_fit_mle,
    gevd_quantile,
    gevd_to_json,
    read_values_csv,
    truncated_gevd_quantile,
    write_values_csv,
)
from .metrics import (
    conditional_mean,
    data_consistency_report,
    pdf_compare_export,
    threshold_table,
    weighted_coverage,
)
from .model import load_checkpoint, save_checkpoint
from .problems import (
    Dataset,
    build_training_set,
    get_problem,
    read_inputs_csv,
    reference_distribution,
    sample_inputs,
    write_inputs_csv,
)
from .training import (
    EtaConfig,
    IdentityObservable,
    MaxObservable,
    WeightedAbsObservable,
    evaluate_observable,
    train_erm,
    train_iict,
    write_log_csv,
)
from .wasserstein import (
    check_w1_sandwich,
    check_wp_bounds,
    w1_bruteforce_oracle,
    w1_empirical,
    w1_tail,
    wp_empirical,
)

log = logging.getLogger("etalearn")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VIOLATION = 0, 2, 3, 4


class UsageError(Exception):
    """Bad flags, bad config or missing inputs (exit 2)."""


class NumericalError(Exception):
    """Divergence or failed fit (exit 3)."""


# --------------------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    problem: str = "toy1d"
    data_csv: str | None = None
    pool_csv: str | None = None
    observable: str | None = None
    observable_weights: list[float] | None = None
    # data
    n_train: int = 100
    exclusion_center: list[float] = field(default_factory=lambda: [2.0, -2.0])
    exclusion_radius: float = 1.5
    input_sigma2: float = 10.0
    # model / optimizer
    hidden: list[int] = field(default_factory=lambda: [256, 256, 256])
    erm_steps: int = 3000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int | None = None
    # eta
    lam: float = 1.0
    tau: float = 0.0
    omega: int = 30
    steps: int = 3000
    pool_size: int = 20_000
    quantile_blocks: list[list[float]] | None = None
    check_refresh: bool = False
    erm_checkpoint: str | None = None
    # reference law
    reference: str = "analytic"
    reference_csv: str | None = None
    n_mc: int = 1_000_000
    gevd_kappa: float | None = None
    gevd_zeta: float | None = None
    gevd_sigma: float | None = None
    gevd_gamma: float | None = None
    gevd_scipy_shape: bool = False
    # evaluation
    n_eval: int = 100_000
    eval_tail_level: float = 0.9
    consistency_level: float = 0.99
    threshold_levels: list[float] = field(default_factory=lambda: [0.9, 0.999])
    n_thresholds: int = 11
    pdf_grid_points: int = 512
    # seeds
    seed: int = 0
    data_seed: int | None = None
    reference_seed: int | None = None
    pool_seed: int | None = None
    eval_seed: int | None = None
    init_seed: int | None = None
    train_seed: int | None = None
    out: str = "out"

    _SEED_OFFSETS = {"data_seed": 0, "reference_seed": 1, "pool_seed": 2, "eval_seed": 3,
                     "init_seed": 0, "train_seed": 0}

    @classmethod
    def keys(cls) -> set[str]:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> "ExperimentConfig":
        unknown = sorted(set(values) - cls.keys())
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
        values = dict(values)
        for f in dataclasses.fields(cls):
            v = values.get(f.name)
            # plain YAML reads 1e-3 as a string
            if str(f.type).startswith("float") and isinstance(v, (str, int)) and not isinstance(v, bool):
                try:
                    values[f.name] = float(v)
                except ValueError:
                    raise UsageError(f"bad config: {f.name} must be a number") from None
        try:
            cfg = cls(**values)
        except TypeError as exc:
            raise UsageError(f"bad config: {exc}") from None
        cfg.validate()
        return cfg

    def named_seed(self, name: str) -> int:
        v = getattr(self, name)
        return int(self.seed + self._SEED_OFFSETS[name] if v is None else v)

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise UsageError(f"bad config: {msg}")

        need(self.problem in ("toy1d", "toy2d", "custom-csv"), "problem must be toy1d, toy2d or custom-csv")
        need(self.problem != "custom-csv" or self.data_csv, "custom-csv needs data_csv")
        need(self.reference in ("analytic", "csv", "gevd"), "reference must be analytic, csv or gevd")
        need(self.reference != "analytic" or self.problem != "custom-csv", "analytic reference needs a toy problem")
        need(self.reference != "csv" or self.reference_csv, "csv reference needs reference_csv")
        if self.reference == "gevd":
            need(None not in (self.gevd_kappa, self.gevd_zeta, self.gevd_sigma),
                 "gevd reference needs gevd_kappa, gevd_zeta, gevd_sigma")
        need(self.observable in (None, "identity", "max", "weighted_abs"), "unknown observable")
        need(self.observable != "weighted_abs" or self.observable_weights, "weighted_abs needs observable_weights")
        need(isinstance(self.hidden, list) and all(isinstance(h, int) and h > 0 for h in self.hidden),
             "hidden must be a list of positive integers")
        for name in ("n_train", "n_eval", "pool_size", "n_mc", "omega", "n_thresholds", "pdf_grid_points"):
            need(isinstance(getattr(self, name), int) and getattr(self, name) >= 1, f"{name} must be a positive integer")
        for name in ("steps", "erm_steps"):
            need(isinstance(getattr(self, name), int) and getattr(self, name) >= 0, f"{name} must be >= 0")
        need(self.lam >= 0, "lam must be >= 0")
        need(0 <= self.tau < 1, "tau must lie in [0, 1)")
        need(self.lr > 0, "lr must be positive")
        need(0 < self.eval_tail_level < 1, "eval_tail_level must lie in (0, 1)")
        need(0 < self.consistency_level < 1, "consistency_level must lie in (0, 1)")
        need(len(self.threshold_levels) == 2 and 0 <= self.threshold_levels[0] <= self.threshold_levels[1] <= 1,
             "threshold_levels must be [lo, hi] within [0, 1]")
        need(len(self.exclusion_center) == 2, "exclusion_center must have two entries")
        for name in self._SEED_OFFSETS:
            need(getattr(self, name) is None or isinstance(getattr(self, name), int), f"{name} must be an integer")
        need(isinstance(self.seed, int), "seed must be an integer")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def echo(self, out: Path) -> None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    # derived pieces

    def quantile_set(self):
        blocks = self.quantile_blocks
        if blocks is None:
            blocks = TOY2D_BLOCKS if self.problem == "toy2d" else TOY1D_BLOCKS
        try:
            Q = build_quantile_set([(float(a), float(b), int(n)) for a, b, n in blocks])
            return Q.restrict(self.tau) if self.tau > 0 else Q
        except (ValueError, TypeError) as exc:
            raise UsageError(f"bad quantile_blocks: {exc}") from None

    def observable_fn(self, state_dim: int):
        name = self.observable
        if name is None:
            if self.problem == "toy2d":
                return WeightedAbsObservable([2.0, 0.5])
            name = "identity" if state_dim == 1 else "max"
        if name == "identity":
            if state_dim != 1:
                raise UsageError("identity observable needs a one-dimensional state")
            return IdentityObservable()
        if name == "max":
            return MaxObservable()
        if len(self.observable_weights) != state_dim:
            raise UsageError("observable_weights length must equal the state dimension")
        return WeightedAbsObservable(self.observable_weights)

    def gevd_reference(self):
        base = GevdParams.from_scipy(self.gevd_kappa, self.gevd_zeta, self.gevd_sigma) if self.gevd_scipy_shape \
            else GevdParams(self.gevd_kappa, self.gevd_zeta, self.gevd_sigma)
        return base if self.gevd_gamma is None else TruncatedGevd(base, self.gevd_gamma)


def _parse_override(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        return key.strip(), yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse value for {key!r}: {exc}") from None


def load_config(path: str | None, overrides: dict[str, Any]) -> ExperimentConfig:
    values: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise UsageError(f"malformed config: {exc}") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise UsageError("config must be a flat key-value mapping")
        values.update(loaded)
    values.update(overrides)
    return ExperimentConfig.from_mapping(values)


# --------------------------------------------------------------------------- shared helpers


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(cfg: ExperimentConfig, out: Path) -> Dataset:
    path = out / "dataset.csv"
    if not path.exists():
        raise UsageError(f"missing data file {path} (run gen-data first)")
    try:
        return Dataset.from_csv(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_pool(cfg: ExperimentConfig, out: Path) -> np.ndarray:
    path = out / "pool.csv"
    if not path.exists():
        raise UsageError(f"missing pool file {path} (run gen-data first)")
    try:
        return read_inputs_csv(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_reference(cfg: ExperimentConfig, out: Path):
    """Object with ``.quantile``; empirical laws also expose ``.samples``."""
    if cfg.reference == "gevd":
        ref = cfg.gevd_reference()
        return ref if isinstance(ref, TruncatedGevd) else _GevdLaw(ref)
    path = out / "reference.csv" if cfg.reference == "analytic" else Path(cfg.reference_csv)
    if not path.exists():
        raise UsageError(f"missing reference file {path}")
    try:
        return EmpiricalDistribution.from_samples(read_values_csv(path))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class _GevdLaw:
    params: GevdParams

    def quantile(self, q):
        return gevd_quantile(self.params, q)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


# --------------------------------------------------------------------------- subcommands


def cmd_gen_data(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg)
    if cfg.problem == "custom-csv":
        try:
            ds = Dataset.from_csv(cfg.data_csv)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read data_csv: {exc}") from None
    else:
        prob = get_problem(cfg.problem)
        try:
            ds = build_training_set(cfg.n_train, cfg.exclusion_center, cfg.exclusion_radius, cfg.input_sigma2,
                                    cfg.named_seed("data_seed"), prob)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    ds.to_csv(out / "dataset.csv")

    if cfg.pool_csv is not None:
        try:
            pool = read_inputs_csv(cfg.pool_csv)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read pool_csv: {exc}") from None
    else:
        pool = np.random.default_rng(cfg.named_seed("pool_seed")).normal(
            0.0, math.sqrt(cfg.input_sigma2), size=(cfg.pool_size, ds.x.shape[1]))
    write_inputs_csv(out / "pool.csv", pool)

    ref_note = cfg.reference
    if cfg.reference == "analytic":
        if cfg.n_mc < 10_000:
            raise UsageError("n_mc must be >= 10000")
        nu0 = reference_distribution(get_problem(cfg.problem), cfg.n_mc, cfg.named_seed("reference_seed"))
        write_values_csv(out / "reference.csv", nu0.samples)
        ref_note = f"analytic ({nu0.n} Monte-Carlo samples)"
    elif cfg.reference == "csv":
        nu0 = _load_reference(cfg, out)
        write_values_csv(out / "reference.csv", nu0.samples)
    else:
        gevd_to_json(cfg.gevd_reference(), out / "reference.json")
    cfg.echo(out)
    _say(args, f"dataset: {len(ds)} rows, observable max {float(ds.y.max())!r}")
    _say(args, f"pool: {pool.shape[0]} inputs; reference: {ref_note}")
    return EXIT_OK


def _erm_for(cfg: ExperimentConfig, ds: Dataset, out: Path, args):
    dims = (ds.x.shape[1], *cfg.hidden, ds.u.shape[1])
    try:
        res = train_erm(ds, dims, steps=cfg.erm_steps, lr=cfg.lr, seed=cfg.named_seed("init_seed"),
                        batch_size=cfg.batch_size, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    except FloatingPointError as exc:
        raise NumericalError(str(exc)) from None
    save_checkpoint(res.params, out / "erm.json")
    write_log_csv(out / "erm_log.csv", res.history)
    _say(args, f"erm: {cfg.erm_steps} steps, final loss {res.history[-1]['erm_loss']!r}" if res.history
         else "erm: 0 steps")
    return res.params


def cmd_train(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg)
    ds = _load_dataset(cfg, out)
    if args.mode == "erm":
        _erm_for(cfg, ds, out, args)
        cfg.echo(out)
        return EXIT_OK

    pool = _load_pool(cfg, out)
    if pool.shape[1] != ds.x.shape[1]:
        raise UsageError("pool and dataset input dimensions differ")
    nu0 = _load_reference(cfg, out)
    ck = Path(cfg.erm_checkpoint) if cfg.erm_checkpoint else out / "erm.json"
    if ck.exists():
        try:
            erm = load_checkpoint(ck)
        except (ValueError, KeyError) as exc:
            raise UsageError(f"{ck}: {exc}") from None
    elif cfg.erm_checkpoint:
        raise UsageError(f"missing checkpoint {ck}")
    else:
        erm = _erm_for(cfg, ds, out, args)
    g = cfg.observable_fn(ds.u.shape[1])
    eta_cfg = EtaConfig(lam=cfg.lam, tau=cfg.tau, omega=cfg.omega, steps=cfg.steps, lr=cfg.lr,
                        seed=cfg.named_seed("train_seed"), pool_size=pool.shape[0], batch_size=cfg.batch_size,
                        beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    try:
        res = train_iict(ds, pool, cfg.quantile_set(), nu0, eta_cfg, erm, g, check_refresh=cfg.check_refresh)
    except FloatingPointError as exc:
        raise NumericalError(str(exc)) from None
    save_checkpoint(res.params, out / "eta.json")
    write_log_csv(out / "eta_log.csv", res.history)
    summary = {"steps": cfg.steps, "lam": cfg.lam, "omega": cfg.omega,
               "refreshes": sum(r["refresh_flag"] for r in res.history),
               "refresh_checks": len(res.refresh_checks), "refresh_idempotent": all(res.refresh_checks)}
    if res.history:
        summary.update({k: res.history[-1][k] for k in ("erm_loss", "tail_w1_loss", "total")})
    (out / "eta_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    cfg.echo(out)
    _say(args, f"eta: {cfg.steps} steps, lambda {cfg.lam}, final total {summary.get('total')!r}")
    if cfg.check_refresh and not summary["refresh_idempotent"]:
        print("index refresh was not idempotent", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_eval(cfg: ExperimentConfig, args) -> int:
    if not args.checkpoints:
        raise UsageError("eval needs at least one checkpoint (or 'truth')")
    out = _out_dir(cfg)
    nu0 = _load_reference(cfg, out)
    toy = cfg.problem != "custom-csv"
    if toy:
        prob = get_problem(cfg.problem)
        X = sample_inputs(cfg.n_eval, cfg.input_sigma2, cfg.named_seed("eval_seed"))
        state_dim = prob.state_dim
    else:
        X = _load_pool(cfg, out)
        state_dim = _load_dataset(cfg, out).u.shape[1]
    g = cfg.observable_fn(state_dim)

    models: dict[str, Any] = {}
    for item in args.checkpoints:
        if item == "truth":
            if not toy:
                raise UsageError("'truth' is only available for toy problems")
            models["truth"] = None
            continue
        p = Path(item)
        if not p.exists():
            raise UsageError(f"missing checkpoint {p}")
        try:
            params = load_checkpoint(p)
        except (ValueError, KeyError) as exc:
            raise UsageError(f"{p}: {exc}") from None
        if params.layer_dims[0] != X.shape[1] or params.layer_dims[-1] != state_dim:
            raise UsageError(f"{p}: architecture does not match the problem")
        name = p.stem
        while name in models:
            name += "_"
        models[name] = params

    def predict(params, Z):
        return prob.observe(Z) if params is None else evaluate_observable(params, Z, g)[0]

    fields = {name: predict(m, X) for name, m in models.items()}
    if not all(np.all(np.isfinite(v)) for v in fields.values()):
        raise NumericalError("non-finite model output")

    samples = {}
    if isinstance(nu0, EmpiricalDistribution):
        samples["reference"] = nu0.samples
    samples.update(fields)
    pdf_compare_export(samples, out / "pdf_compare.csv", n_grid=cfg.pdf_grid_points)

    Qt = cfg.quantile_set().restrict(cfg.eval_tail_level)
    rows = []
    for name, v in fields.items():
        d = EmpiricalDistribution.from_samples(v)
        rows.append([name, w1_tail(d.quantile, nu0.quantile, Qt), len(Qt)])
    _write_csv(out / "tail_w1.csv", ["model", "tail_w1", "n_levels"], rows)

    consistency = {}
    if toy:
        t_star = float(nu0.quantile(cfg.consistency_level))
        for name, m in models.items():
            try:
                rep = data_consistency_report(prob.observe, lambda Z, m=m: predict(m, Z), t_star, X)
                consistency[name] = json.loads(rep.to_json())
            except ValueError as exc:
                consistency[name] = {"error": str(exc)}
    (out / "consistency.json").write_text(json.dumps(consistency, indent=2, sort_keys=True) + "\n")

    lo, hi = cfg.threshold_levels
    ts = np.linspace(float(nu0.quantile(lo)), float(nu0.quantile(hi)), cfg.n_thresholds)
    header = ["t", *samples]
    _write_csv(out / "conditional_mean.csv", header, threshold_table(samples, ts, conditional_mean))
    clipped = {k: np.maximum(v, 0.0) for k, v in samples.items()}
    _write_csv(out / "coverage.csv", header, threshold_table(clipped, ts, weighted_coverage))
    cfg.echo(out)
    for name, tw, _ in rows:
        _say(args, f"{name}: tail-W1 {tw!r}")
    return EXIT_OK


def _faulty_w1(a, b):
    # negative control for the bound checker
    return w1_empirical(a, b) + 1.0


def _random_pair(rng, n: int):
    """Two smooth random functions evaluated at shared inputs."""
    x = rng.normal(size=n)
    c = rng.uniform(-3, 3, size=6)
    y1 = c[0] * np.sin(c[1] * x) + c[2] * x
    y2 = c[3] * np.tanh(c[4] * x) + c[5] * x ** 2
    return y1, y2


def run_bounds_suite(trials: int, seed: int, w1_fn=w1_empirical) -> dict:
    rng = np.random.default_rng(seed)
    report: dict[str, Any] = {"trials": trials, "seed": seed, "violations": []}

    def fail(kind, **inst):
        report["violations"].append({"check": kind, **{k: np.asarray(v).tolist() for k, v in inst.items()}})

    for _ in range(trials):
        n = int(rng.integers(2, 8))
        a, b = rng.uniform(-10, 10, n), rng.uniform(-10, 10, n)
        if abs(w1_fn(a, b) - w1_bruteforce_oracle(a, b)) > 1e-12:
            fail("oracle", a=a, b=b)
    for _ in range(trials):
        y1, y2 = _random_pair(rng, int(rng.integers(1, 50)))
        if not check_w1_sandwich(y1, y2, w1_fn).satisfied:
            fail("w1_sandwich", y1=y1, y2=y2)
    wp_fn = wp_empirical if w1_fn is w1_empirical else (lambda a, b, p: w1_fn(a, b) if p == 1 else wp_empirical(a, b, p))
    for _ in range(trials):
        y1, y2 = _random_pair(rng, int(rng.integers(1, 50)))
        vals = []
        for p in (1, 2, 3):
            r = check_wp_bounds(y1, y2, p, wp_fn)
            vals.append(r.wp)
            if not r.satisfied:
                fail(f"wp_bounds_p{p}", y1=y1, y2=y2)
        if any(x > y + 1e-9 * (1 + abs(y)) for x, y in zip(vals, vals[1:])):
            fail("wp_monotone", y1=y1, y2=y2)
    report["n_violations"] = len(report["violations"])
    return report


def cmd_bounds_check(cfg: ExperimentConfig, args) -> int:
    if args.trials < 1:
        raise UsageError("trials must be >= 1")
    out = _out_dir(cfg)
    rep = run_bounds_suite(args.trials, cfg.seed, _faulty_w1 if args.inject_fault else w1_empirical)
    (out / "bounds_report.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    if rep["n_violations"]:
        print(f"{rep['n_violations']} violation(s); first: {json.dumps(rep['violations'][0])}", file=sys.stderr)
        return EXIT_VIOLATION
    _say(args, f"bounds-check: {args.trials} trials per suite, no violations")
    return EXIT_OK


def cmd_gevd(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg)
    if args.action == "fit":
        if not args.samples:
            raise UsageError("gevd fit needs --samples")
        try:
            data = read_values_csv(args.samples)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read samples: {exc}") from None
        try:
            params = gevd_fit_mle(data)
        except (ValueError, FloatingPointError, RuntimeError) as exc:
            raise NumericalError(f"fit failed: {exc}") from None
        text = gevd_to_json(params, out / "gevd.json")
        _say(args, text.strip())
        return EXIT_OK

    if None in (args.kappa, args.zeta, args.sigma):
        raise UsageError("gevd quantile needs --kappa, --zeta and --sigma")
    if not args.q:
        raise UsageError("gevd quantile needs at least one --q")
    try:
        base = GevdParams.from_scipy(args.kappa, args.zeta, args.sigma) if args.scipy_shape \
            else GevdParams(args.kappa, args.zeta, args.sigma)
        law = base if args.gamma is None else TruncatedGevd(base, args.gamma)
        qs = np.asarray(args.q, dtype=float)
        if np.any((qs < 0) | (qs > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        vals = gevd_quantile(base, qs) if args.gamma is None else truncated_gevd_quantile(law, qs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = list(zip(qs.tolist(), np.atleast_1d(vals).tolist()))
    _write_csv(out / "gevd_quantiles.csv", ["q", "value"], rows)
    for q, v in rows:
        _say(args, f"{q!r},{v!r}")
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="YAML or JSON key-value config file")
    parser.add_argument("--out", default=d, help="output directory")
    parser.add_argument("--seed", type=int, default=d, help="master seed")
    parser.add_argument("--set", action="append", default=argparse.SUPPRESS if suppress else [],
                        metavar="KEY=VALUE", help="override one config key (repeatable)")
    parser.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="etalearn", description=__doc__.splitlines()[0])
    _common(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-data", help="write training set, input pool and reference samples")
    _common(s, suppress=True)
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("train", help="train an ERM or eta model")
    _common(s, suppress=True)
    s.add_argument("--mode", choices=("erm", "eta"), default="eta")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="compare checkpoints against the reference law")
    _common(s, suppress=True)
    s.add_argument("checkpoints", nargs="*", help="checkpoint files, or 'truth' for the exact map")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bounds-check", help="randomized checks of the Wasserstein bounds")
    _common(s, suppress=True)
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_bounds_check)

    s = sub.add_parser("gevd", help="fit a GEV law or evaluate its quantiles")
    _common(s, suppress=True)
    s.add_argument("action", choices=("fit", "quantile"))
    s.add_argument("--samples", help="CSV of samples (fit)")
    s.add_argument("--kappa", type=float)
    s.add_argument("--zeta", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--gamma", type=float, help="tail truncation mass")
    s.add_argument("--scipy-shape", action="store_true",
                   help="read --kappa as scipy.stats.genextreme's c (opposite sign)")
    s.add_argument("--q", type=float, action="append", help="probability level (repeatable)")
    s.set_defaults(func=cmd_gevd)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        overrides = dict(_parse_override(item) for item in args.set)
        if args.out is not None:
            overrides["out"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
        cfg = load_config(args.config, overrides)
        return args.func(cfg, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Synthetic data, CSV ingestion, experiment sweeps and reports."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .eigen_release import release_lambda_min_qsc
from .model import Dataset, Domain, fit, hypercube, make_loss
from .privacy import PrivacyParams
from .release import release_functional, release_theta_generic, release_theta_qsc

MECHANISMS = ("local", "local_generic", "nonprivate", "naive", "objective", "dpsgd", "eigen")


# ---------------------------------------------------------------------------
# data


def _sphere(d, rng):
    g = rng.standard_normal(d)
    return g / np.linalg.norm(g)


def gen_robust_data(n: int, d: int, r_theta: float, sigma_noise: float, seed) -> tuple[Dataset, np.ndarray]:
    rng = np.random.default_rng(seed)
    theta = r_theta * _sphere(d, rng)
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    y = X @ theta + sigma_noise * rng.laplace(0.0, 1.0, size=n)
    return Dataset(X, y, hypercube(1.0)), theta


def gen_logistic_data(n: int, d: int, r_theta: float, seed) -> tuple[Dataset, np.ndarray]:
    rng = np.random.default_rng(seed)
    theta = r_theta * _sphere(d, rng)
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    prob = 1 / (1 + np.exp(-(X @ theta)))
    y = np.where(rng.random(n) < prob, 1.0, -1.0)
    return Dataset(X, y, hypercube(1.0)), theta


class CsvError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class CsvSchema:
    features: tuple[str, ...]
    label: str
    label_threshold: float | None = None
    domain: Domain = field(default_factory=hypercube)


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Read a headered CSV into a Dataset; rows are numbered from 1 after the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (*schema.features, schema.label) if c not in header]
        if missing:
            raise CsvError(f"missing columns {missing}")
        X, y = [], []
        for i, rec in enumerate(reader, start=1):
            try:
                x = [float(rec[c]) for c in schema.features]
                v = float(rec[schema.label])
            except (TypeError, ValueError) as exc:
                raise CsvError(f"cannot parse value ({exc})", i) from None
            if not all(map(math.isfinite, x)) or not math.isfinite(v):
                raise CsvError("non-finite value", i)
            if not schema.domain.contains(np.array(x))[0]:
                raise CsvError("covariates outside the declared domain", i)
            if schema.label_threshold is not None:
                v = 1.0 if v > schema.label_threshold else -1.0
            X.append(x)
            y.append(v)
    if not X:
        raise CsvError("no data rows")
    return Dataset(np.array(X), np.array(y), schema.domain)


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    mechanisms: list[str]
    n_grid: list[int]
    eps_grid: list[float]
    d: int = 5
    loss: str = "robust"
    delta: float = 1e-6
    lambda_reg: float = 0.0
    theta_norm: float = 1.0
    noise_sigma: float = 0.5
    seeds: int = 25
    pnorm: float | None = None
    target: str = "functional"
    master_seed: int = 0
    fallback: str | None = None
    out: str | None = None

    def __post_init__(self):
        if not (self.mechanisms and self.n_grid and self.eps_grid):
            raise ValueError("mechanism, n and epsilon grids must be non-empty")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        unknown = set(self.mechanisms) - set(MECHANISMS)
        if unknown:
            raise ValueError(f"unknown mechanisms {sorted(unknown)}")
        if self.target not in ("functional", "theta"):
            raise ValueError("target must be 'functional' or 'theta'")
        if isinstance(self.pnorm, str):
            self.pnorm = float(self.pnorm)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        if out["pnorm"] is not None and math.isinf(out["pnorm"]):
            out["pnorm"] = "inf"
        return out


@dataclass
class ResultRow:
    mechanism: str
    n: int
    d: int
    epsilon: float
    seed: int
    error: float | None
    bottom: bool
    lambda_min_hat: float | None
    lambda_max_hat: float | None
    wall_time: float
    error_star: float | None = None
    status: str = "ok"


RESULT_FIELDS = [f.name for f in dataclasses.fields(ResultRow)]


def _make_data(cfg: ExperimentConfig, n: int, seed: int):
    ss = np.random.SeedSequence([cfg.master_seed, n, cfg.d, seed])
    if cfg.loss == "logistic":
        return gen_logistic_data(n, cfg.d, cfg.theta_norm, ss)
    return gen_robust_data(n, cfg.d, cfg.theta_norm, cfg.noise_sigma, ss)


def _run_mechanism(name, cfg, data, loss, res, p, rng):
    """Returns (estimate or None, lambda_min_hat, lambda_max_hat, status)."""
    u = np.eye(data.d)[0] if cfg.target == "functional" else None
    lam = cfg.lambda_reg
    if name == "eigen":
        rel = release_lambda_min_qsc(data, loss, lam, p, rng, fitted=res)
        return rel.lambda_hat, rel.lambda_hat, None, "ok"
    if name == "local" and u is not None:
        out = release_functional(data, loss, u, lam, None, p, cfg.pnorm, rng, fitted=res)
        lmin = out.diagnostics.get("lambda_min_hat")
        lmax = out.diagnostics.get("lambda_max_hat")
        if out.is_bottom and cfg.fallback == "objective":
            alt = baselines.objective_perturbation(data, loss, None, PrivacyParams(p.epsilon / 2, p.delta), rng)
            return u @ alt.value, lmin, lmax, "fallback:objective"
        return out.value, lmin, lmax, "ok"
    if name == "nonprivate":
        out = baselines.nonprivate_idealized(data, loss, u, lam, p, rng, cfg.pnorm, fitted=res)
        return out.value, None, None, "ok"

    # vector-valued releases, projected on u for functional targets
    lmin = lmax = None
    status = "ok"
    if name == "local":
        out = release_theta_qsc(data, loss, lam, None, p, rng, fitted=res)
        lmin = out.diagnostics.get("lambda_min_hat")
        if out.is_bottom and cfg.fallback == "objective":
            out = baselines.objective_perturbation(data, loss, None, PrivacyParams(p.epsilon / 2, p.delta), rng)
            status = "fallback:objective"
    elif name == "local_generic":
        out = release_theta_generic(data, loss, lam, None, p, rng, fitted=res)
        lmin = out.diagnostics.get("lambda_min_hat")
    elif name == "naive":
        out = baselines.naive_output_perturbation(data, loss, p, rng)
    elif name == "objective":
        out = baselines.objective_perturbation(data, loss, None, p, rng)
    elif name == "dpsgd":
        out = baselines.dpsgd(data, loss, p, baselines.SGDConfig(), rng)
    else:
        raise ValueError(name)
    value = out.value
    if value is not None and u is not None:
        value = float(u @ value)
    return value, lmin, lmax, status


def _relative(est, truth):
    if truth == 0:
        return 0.0 if est == 0 else math.inf
    return abs(est - truth) / truth


def _error(est, target):
    if est is None:
        return None
    diff = np.atleast_1d(np.asarray(est, dtype=float) - target)
    return float(np.linalg.norm(diff))


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """Every (n, eps) cell x seed x mechanism, in grid order.

    All mechanisms and all epsilon values for a given (n, seed) share one
    stream key, so output noise comes from the same standard normal draws
    (common random numbers) and comparisons across them are paired.
    """
    loss = make_loss(cfg.loss)
    rows = []
    for cell, n in enumerate(cfg.n_grid):
        for eps in cfg.eps_grid:
            p = PrivacyParams(eps, cfg.delta)
            for seed in range(cfg.seeds):
                data, theta_star = _make_data(cfg, n, seed)
                try:
                    res = fit(data, loss, cfg.lambda_reg)
                except Exception as exc:  # recorded, never aborts the sweep
                    for name in cfg.mechanisms:
                        rows.append(ResultRow(name, n, cfg.d, eps, seed, None, True, None, None, 0.0, None, f"fit-error:{type(exc).__name__}"))
                    continue
                for name in cfg.mechanisms:
                    rng = np.random.default_rng([cfg.master_seed, cell, seed])
                    start = time.perf_counter()
                    try:
                        est, lmin, lmax, status = _run_mechanism(name, cfg, data, loss, res, p, rng)
                    except Exception as exc:
                        est, lmin, lmax, status = None, None, None, f"error:{type(exc).__name__}"
                    wall = time.perf_counter() - start
                    if name == "eigen":
                        truth = max(res.lambda_min_unreg, 0.0)
                        err = None if est is None else _relative(est, truth)
                        err_star = None
                        if est == 0.0:
                            status = "zero"
                    elif cfg.target == "functional":
                        err = _error(est, res.theta[0])
                        err_star = _error(est, theta_star[0])
                    else:
                        err = _error(est, res.theta)
                        err_star = _error(est, theta_star)
                    rows.append(ResultRow(name, n, cfg.d, eps, seed, err, err is None, lmin, lmax, wall, err_star, status))
    return rows


# ---------------------------------------------------------------------------
# reports

AGGREGATE_FIELDS = ["mechanism", "n", "d", "epsilon", "runs", "bottom_rate", "median_error", "mean_error", "std_error", "ci_low", "ci_high"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def aggregate(rows: list[ResultRow]) -> list[dict]:
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.mechanism, r.n, r.d, r.epsilon), []).append(r)
    out = []
    for (mech, n, d, eps), rs in sorted(groups.items()):
        errs = np.array([r.error for r in rs if r.error is not None], dtype=float)
        k = len(errs)
        med = float(np.median(errs)) if k else math.nan
        mean = float(errs.mean()) if k else math.nan
        se = float(errs.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan
        out.append(
            {
                "mechanism": mech,
                "n": n,
                "d": d,
                "epsilon": eps,
                "runs": len(rs),
                "bottom_rate": sum(r.bottom for r in rs) / len(rs),
                "median_error": med,
                "mean_error": mean,
                "std_error": se,
                "ci_low": med - 2 * se,
                "ci_high": med + 2 * se,
            }
        )
    return out


def emit_report(rows: list[ResultRow], path) -> tuple[Path, Path]:
    """Write results.csv and aggregate.csv into the directory ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    res_path, agg_path = out / "results.csv", out / "aggregate.csv"
    with open(res_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in RESULT_FIELDS])
    with open(agg_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_FIELDS)
        for a in aggregate(rows):
            w.writerow([_fmt(a[f]) for f in AGGREGATE_FIELDS])
    return res_path, agg_path


def read_results(path) -> list[ResultRow]:
    def opt(s, cast=float):
        return None if s == "" else cast(s)

    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                ResultRow(
                    rec["mechanism"],
                    int(rec["n"]),
                    int(rec["d"]),
                    float(rec["epsilon"]),
                    int(rec["seed"]),
                    opt(rec["error"]),
                    rec["bottom"] == "1",
                    opt(rec["lambda_min_hat"]),
                    opt(rec["lambda_max_hat"]),
                    float(rec["wall_time"]),
                    opt(rec["error_star"]),
                    rec["status"],
                )
            )
    return rows

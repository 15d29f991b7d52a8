"""Command line entry point: ``dpmestim <command> [options]``."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import baselines
from .eigen_release import release_lambda_max, release_lambda_min_generic, release_lambda_min_qsc
from .harness import (
    CsvSchema,
    ExperimentConfig,
    emit_report,
    gen_logistic_data,
    gen_robust_data,
    load_csv,
    read_results,
    run_experiment,
)
from .model import fit, hypercube, l2_ball, make_loss
from .privacy import PrivacyParams
from .release import release_functional, release_theta_generic, release_theta_qsc


def _pnorm(s):
    if s is None:
        return None
    return math.inf if s in ("inf", "Inf", "infinity") else float(s)


def _load_config(path):
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _dataset(args, cfg):
    if args.csv:
        domain = l2_ball(args.radius) if args.domain == "l2ball" else hypercube(args.radius)
        schema = CsvSchema(tuple(args.features.split(",")), args.label, args.label_threshold, domain)
        return load_csv(args.csv, schema)
    n = args.n or cfg.get("n", 1000)
    d = args.d or cfg.get("d", 5)
    r = cfg.get("theta_norm", 1.0)
    if args.loss == "logistic":
        data, _ = gen_logistic_data(n, d, r, args.seed)
    else:
        data, _ = gen_robust_data(n, d, r, cfg.get("noise_sigma", 0.5), args.seed)
    return data


def _emit(obj, out):
    text = json.dumps(obj, indent=2, default=_jsonable)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    raise TypeError(type(v))


def _outcome(o):
    return {
        "value": None if o.value is None else o.value,
        "bottom": o.is_bottom,
        "noise_std": o.noise_std,
        "ledger_totals": o.ledger.totals,
        "diagnostics": o.diagnostics,
    }


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON document; flags override its fields")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--eps", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--loss", choices=("robust", "logistic"), default="robust")
    common.add_argument("--p", dest="pnorm", choices=("2", "inf"))
    common.add_argument("--out")
    common.add_argument("--lambda-reg", type=float)
    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--n", type=int)
    data.add_argument("--d", type=int)
    data.add_argument("--csv")
    data.add_argument("--features", help="comma-separated feature columns")
    data.add_argument("--label")
    data.add_argument("--label-threshold", type=float)
    data.add_argument("--domain", choices=("hypercube", "l2ball"), default="hypercube")
    data.add_argument("--radius", type=float, default=1.0)

    ap = argparse.ArgumentParser(prog="dpmestim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("fit", parents=[common, data])
    s = sub.add_parser("release-lambda", parents=[common, data])
    s.add_argument("--which", choices=("min", "min-generic", "max"), default="min")
    s = sub.add_parser("release-theta", parents=[common, data])
    s.add_argument("--method", choices=("qsc", "generic"), default="qsc")
    s = sub.add_parser("release-functional", parents=[common, data])
    s.add_argument("--coord", type=int, default=0, help="release e_coord' theta")
    s = sub.add_parser("baseline", parents=[common, data])
    s.add_argument("--name", choices=("objective", "naive", "nonprivate", "dpsgd"), required=True)
    s = sub.add_parser("experiment", parents=[common])
    s.add_argument("--fallback", choices=("objective",))
    s = sub.add_parser("report", parents=[common])
    s.add_argument("--results", required=True, help="results.csv to re-aggregate")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _load_config(args.config)
    eps = args.eps if args.eps is not None else cfg.get("eps", 1.0)
    delta = args.delta if args.delta is not None else cfg.get("delta", 1e-6)
    lam = args.lambda_reg if args.lambda_reg is not None else cfg.get("lambda_reg", 0.0)
    pnorm = _pnorm(args.pnorm) if args.pnorm else _pnorm(cfg.get("pnorm"))

    if args.command == "experiment":
        fields = dict(cfg)
        fields.pop("eps", None)
        for key, val in (("delta", args.delta), ("lambda_reg", args.lambda_reg), ("fallback", args.fallback)):
            if val is not None:
                fields[key] = val
        if args.eps is not None:
            fields["eps_grid"] = [args.eps]
        if args.pnorm:
            fields["pnorm"] = pnorm
        if args.config is None or "loss" not in cfg:
            fields["loss"] = args.loss
        fields["master_seed"] = args.seed if args.seed else fields.get("master_seed", 0)
        out = args.out or fields.get("out") or "results"
        fields["out"] = out
        exp = ExperimentConfig(**fields)
        rows = run_experiment(exp)
        paths = emit_report(rows, out)
        print(f"wrote {paths[0]} and {paths[1]} ({len(rows)} rows)")
        return 0
    if args.command == "report":
        rows = read_results(args.results)
        paths = emit_report(rows, args.out or ".")
        print(f"wrote {paths[0]} and {paths[1]}")
        return 0

    loss = make_loss(args.loss)
    data = _dataset(args, cfg)
    p = PrivacyParams(eps, delta)
    rng = np.random.default_rng(args.seed)
    if args.command == "fit":
        res = fit(data, loss, lam)
        _emit(
            {
                "theta": res.theta,
                "lambda_min": res.lambda_min,
                "lambda_max": res.lambda_max,
                "grad_norm": res.grad_norm,
                "iterations": res.iterations,
            },
            args.out,
        )
    elif args.command == "release-lambda":
        if args.which == "min":
            rel = release_lambda_min_qsc(data, loss, lam, p, rng)
        elif args.which == "min-generic":
            rel = release_lambda_min_generic(data, loss, lam, p, rng)
        else:
            lo = release_lambda_min_qsc(data, loss, lam, p, rng)
            rel = release_lambda_max(data, loss, lam, lo.lambda_hat, p, rng)
        _emit({"lambda_hat": rel.lambda_hat, "n_hat": rel.n_hat, "saturated": rel.saturated}, args.out)
    elif args.command == "release-theta":
        fn = release_theta_qsc if args.method == "qsc" else release_theta_generic
        _emit(_outcome(fn(data, loss, lam, None, p, rng)), args.out)
    elif args.command == "release-functional":
        u = np.eye(data.d)[args.coord]
        _emit(_outcome(release_functional(data, loss, u, lam, None, p, pnorm, rng)), args.out)
    elif args.command == "baseline":
        if args.name == "objective":
            o = baselines.objective_perturbation(data, loss, None, p, rng)
        elif args.name == "naive":
            o = baselines.naive_output_perturbation(data, loss, p, rng)
        elif args.name == "nonprivate":
            o = baselines.nonprivate_idealized(data, loss, None, lam, p, rng, pnorm)
        else:
            o = baselines.dpsgd(data, loss, p, baselines.SGDConfig(), rng)
        _emit(_outcome(o), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

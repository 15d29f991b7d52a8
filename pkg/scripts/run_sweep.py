"""Run an experiment config and print the median-error table.

    python3 scripts/run_sweep.py scripts/configs/epsilon_sweep.json [--out DIR]
"""

import argparse
import json
import sys

from dpmestim.harness import ExperimentConfig, aggregate, emit_report, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", help="output directory (default: the config's out field)")
    ap.add_argument("--seeds", type=int, help="override the number of seeds")
    args = ap.parse_args(argv)

    with open(args.config, encoding="utf-8") as fh:
        fields = json.load(fh)
    if args.out:
        fields["out"] = args.out
    if args.seeds:
        fields["seeds"] = args.seeds
    cfg = ExperimentConfig(**fields)
    rows = run_experiment(cfg)
    paths = emit_report(rows, cfg.out or "results")

    print(f"{'mechanism':<14}{'n':>8}{'eps':>6}{'median':>12}{'ci_low':>12}{'ci_high':>12}{'bottom':>8}")
    for g in aggregate(rows):
        med = g["median_error"]
        print(
            f"{g['mechanism']:<14}{g['n']:>8}{g['epsilon']:>6g}"
            f"{_num(med):>12}{_num(g['ci_low']):>12}{_num(g['ci_high']):>12}{g['bottom_rate']:>8.2f}"
        )
    print(f"wrote {paths[0]} and {paths[1]}")
    return 0


def _num(v):
    return "-" if v is None else f"{v:.3e}"


if __name__ == "__main__":
    sys.exit(main())

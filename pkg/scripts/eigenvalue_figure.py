"""Private lambda_min estimates against n/d (robust regression, d = 5).

Prints, per n/d, the fraction of seeds releasing exactly zero and the
median relative error of the released lower bound.
"""

import argparse

import numpy as np

from dpmestim.harness import ExperimentConfig, emit_report, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=5)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--eps", type=float, default=1.0)
    ap.add_argument("--ratios", default="40,80,160,200,400,800,1600,3200")
    ap.add_argument("--out", default="results/eigenvalue_figure")
    args = ap.parse_args()

    ratios = [int(r) for r in args.ratios.split(",")]
    cfg = ExperimentConfig(["eigen"], [r * args.d for r in ratios], [args.eps], d=args.d, seeds=args.seeds)
    rows = run_experiment(cfg)
    print(f"{'n/d':>6}{'zero frac':>11}{'median rel err':>16}")
    for r in ratios:
        rs = [x for x in rows if x.n == r * args.d]
        zero = np.mean([x.lambda_min_hat == 0.0 for x in rs])
        err = [x.error for x in rs if x.error is not None]
        med = float(np.median(err)) if err else float("nan")
        print(f"{r:>6}{zero:>11.2f}{med:>16.3f}")
    paths = emit_report(rows, args.out)
    print(f"wrote {paths[0]} and {paths[1]}")


if __name__ == "__main__":
    main()

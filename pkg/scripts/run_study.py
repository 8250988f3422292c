#!/usr/bin/env python3
"""Reproduce the full numerical study at study resolution.

Runs, in order: the factor-surface solve (with the closed-form check when
excitation is turned off), the efficient frontier with forward-simulation
validation, the four sensitivity sweeps, and the contagious-versus-
deterministic comparisons.  Everything lands as CSV under --out; surfaces
are cached, so re-runs are cheap.

At the default resolution (dt=0.02, dlam=0.01, 5000 paths per node) the
whole script takes on the order of fifteen minutes on two cores; pass
--quick for a coarse preview run.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from mvhawkes.cli import main as cli  # noqa: E402

QUICK = ["--set", "solver.dlam=0.02", "--set", "solver.n_paths=1000"]


def run(argv, label):
    print(f"\n=== {label}: mvhawkes {' '.join(argv)}")
    code = cli(argv)
    if code != 0:
        sys.exit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="study_runs")
    parser.add_argument("--seed", type=int, default=1729)
    parser.add_argument("--quick", action="store_true",
                        help="coarse grid and fewer paths")
    args = parser.parse_args()
    base = ["--out", args.out, "--seed", str(args.seed)]
    if args.quick:
        base += QUICK

    run(base + ["solve-g"], "factor surface (headline parameters)")
    run(base + ["--set", "hawkes.beta=0.0", "solve-g"],
        "no-excitation surface vs closed form")
    run(base + ["frontier", "--validate"],
        "efficient frontier + wealth validation")
    run(base + ["sensitivity"], "sensitivity sweeps")
    run(base + ["compare-poisson"], "contagious vs deterministic intensity")
    print(f"\nall outputs under {args.out}/")


if __name__ == "__main__":
    main()

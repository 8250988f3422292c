#!/usr/bin/env python3
"""Generic plots for the emitted CSVs (surface, frontiers, sweeps, paths).

The pipeline itself is data-only; this helper renders whatever CSVs it
finds in a run directory to PNG.  Requires matplotlib.
"""

import argparse
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_surface(path: Path, out: Path):
    rows = np.genfromtxt(path, delimiter=",", names=True)
    if "lambda_2" in (rows.dtype.names or ()):
        return  # only the one-component surface is rendered
    fig, ax = plt.subplots(subplot_kw={"projection": "3d"}, figsize=(7, 5))
    ax.plot_trisurf(rows["t"], rows["lambda_1"], rows["gtilde"],
                    cmap="viridis", linewidth=0.1)
    ax.set_xlabel("t")
    ax.set_ylabel("intensity")
    ax.set_zlabel("factor")
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_frontier(path: Path, out: Path):
    rows = np.genfromtxt(path, delimiter=",", names=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rows["sd"], rows["xi"], marker="o", ms=3)
    ax.set_xlabel("standard deviation of terminal wealth")
    ax.set_ylabel("expected terminal wealth")
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_sweep(path: Path, out: Path):
    rows = np.genfromtxt(path, delimiter=",", names=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    for level in np.unique(rows["level"]):
        sel = rows["level"] == level
        ax.plot(np.sqrt(rows["variance"][sel]), rows["xi"][sel],
                label=f"level={level:g}")
    ax.set_xlabel("standard deviation of terminal wealth")
    ax.set_ylabel("expected terminal wealth")
    ax.legend()
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dir", type=Path)
    args = parser.parse_args()
    run = args.run_dir
    made = []
    if (run / "surface.csv").exists():
        plot_surface(run / "surface.csv", run / "surface.png")
        made.append("surface.png")
    if (run / "frontier.csv").exists():
        plot_frontier(run / "frontier.csv", run / "frontier.png")
        made.append("frontier.png")
    for sweep in run.glob("sweep_*.csv"):
        target = sweep.with_suffix(".png").name
        plot_sweep(sweep, run / target)
        made.append(target)
    print("rendered:", ", ".join(made) if made else "nothing to plot")


if __name__ == "__main__":
    main()

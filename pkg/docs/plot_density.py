#!/usr/bin/env python3
"""Documentation example: re-plot a `copreg density` output directory.

Usage: python docs/plot_density.py <density-output-dir> [out.png]

Shows the empirical checkerboard density as a heat map with the true and
estimated mean/quantile regression curves overlaid.  Needs matplotlib; not a
supported component of the package, just a reference for the CSV formats.
"""

import csv
import json
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def read_grid(path):
    with open(str(path) + ".json") as fh:
        meta = json.load(fh)
    n = meta["N"]
    dens = np.zeros((n, n))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            dens[int(row[0]) - 1, int(row[1]) - 1] = float(row[-1])
    return dens


def read_step(path):
    lefts, rights, vals = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            lefts.append(float(row[1]))
            rights.append(float(row[2]))
            vals.append(float(row[3]))
    return np.asarray(lefts), np.asarray(rights), np.asarray(vals)


def read_xy(path):
    xs, vs = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            xs.append(float(row[0]))
            vs.append(float(row[1]))
    return np.asarray(xs), np.asarray(vs)


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    base = sys.argv[1].rstrip("/")
    out = sys.argv[2] if len(sys.argv) > 2 else "density.png"

    dens = read_grid(f"{base}/density_grid.csv")
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(dens.T, origin="lower", extent=(0, 1, 0, 1), cmap="Greys",
              aspect="auto")
    for name, color in (("truth_mean", "black"), ("truth_quantile", "gray")):
        xs, vs = read_xy(f"{base}/{name}.csv")
        ax.plot(xs, vs, color=color, lw=1.8, label=name.replace("_", " "))
    for name, color in (("est_mean", "black"), ("est_quantile", "gray")):
        lefts, rights, vals = read_step(f"{base}/{name}.csv")
        ax.step(np.append(lefts, rights[-1]), np.append(vals, vals[-1]),
                where="post", color=color, lw=1.0, ls="--",
                label=name.replace("_", " "))
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()

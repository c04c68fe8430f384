#!/usr/bin/env python3
"""Render figures from the solver's CSV output.

Standalone by design: reads only CSV and mesh snapshot files, never the
solver package.  Three figure kinds:

  convergence - log-log error/estimator curves against h, x axis reversed
  adaptive    - error/estimator curves against the iteration index
  heatmap     - side-by-side per-element estimator and error maps on a
                mesh snapshot
"""

import argparse
import csv
import sys
from dataclasses import dataclass

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


class PlotError(Exception):
    pass


@dataclass
class PlotJob:
    kind: str
    inputs: list
    out: str


def read_csv_columns(path):
    """Column name -> float array; comment lines starting with # skipped."""
    with open(path) as f:
        rows = [r for r in csv.reader(f)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise PlotError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    if not body:
        raise PlotError(f"{path}: no data rows")
    cols = {}
    for j, name in enumerate(header):
        vals = []
        for r in body:
            cell = r[j].strip() if j < len(r) else ""
            vals.append(float(cell) if cell else np.nan)
        cols[name.strip()] = np.array(vals)
    return cols


def require(cols, names, path):
    missing = [n for n in names if n not in cols]
    if missing:
        raise PlotError(f"{path}: missing columns {missing}")
    return [cols[n] for n in names]


def read_mesh_snapshot(path):
    """Vertices and triangles of the ASCII mesh format."""
    with open(path) as f:
        lines = f.read().split("\n")
    nv, nt, nb = (int(x) for x in lines[0].split())
    verts = np.array([[float(v) for v in lines[1 + i].split()]
                      for i in range(nv)])
    tris = np.array([[int(v) for v in lines[1 + nv + i].split()]
                     for i in range(nt)])
    return verts, tris


CONVERGENCE_CURVES = [
    ("E_fem", "tab:blue", "^"),
    ("E_ba", "tab:green", "s"),
    ("E_est", "tab:orange", "o"),
    ("E_est_guar", "tab:red", "d"),
]


def plot_convergence(job):
    """Four error curves against h on reversed log-log axes.

    Returns the plotted arrays keyed by column name."""
    cols = read_csv_columns(job.inputs[0])
    names = ["h"] + [n for n, _, _ in CONVERGENCE_CURVES]
    h, *curves = require(cols, names, job.inputs[0])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    plotted = {"h": h}
    for (name, color, marker), values in zip(CONVERGENCE_CURVES, curves):
        ax.loglog(h, values, color=color, marker=marker, label=name)
        plotted[name] = values
    ax.invert_xaxis()
    ax.set_xlabel("h")
    ax.set_ylabel("relative error (%)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(job.out, dpi=150)
    plt.close(fig)
    return plotted


def plot_adaptive(job):
    """Estimated and reference errors against the iteration index."""
    cols = read_csv_columns(job.inputs[0])
    it, e_fem, e_est = require(cols, ["iter", "E_fem", "E_est"],
                               job.inputs[0])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.semilogy(it, e_fem, marker="^", color="tab:blue", label="E_fem")
    ax.semilogy(it, e_est, marker="o", color="tab:orange", label="E_est")
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative error (%)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(job.out, dpi=150)
    plt.close(fig)
    return {"iter": it, "E_fem": e_fem, "E_est": e_est}


def plot_heatmap(job):
    """Side-by-side per-element estimator and error maps."""
    if len(job.inputs) != 2:
        raise PlotError("heatmap needs a mesh file and an element CSV")
    verts, tris = read_mesh_snapshot(job.inputs[0])
    cols = read_csv_columns(job.inputs[1])
    eta, err = require(cols, ["eta_K", "err_K"], job.inputs[1])
    if len(eta) != len(tris):
        raise PlotError(
            f"value/mesh mismatch: {len(eta)} values vs {len(tris)} elements")
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.5), sharey=True)
    for ax, values, title in ((axes[0], eta, "estimator"),
                              (axes[1], err, "error")):
        tp = ax.tripcolor(verts[:, 0], verts[:, 1], tris, facecolors=values,
                          cmap="viridis")
        ax.triplot(verts[:, 0], verts[:, 1], tris, color="k", lw=0.2,
                   alpha=0.4)
        ax.set_title(title)
        ax.set_aspect("equal")
        fig.colorbar(tp, ax=ax, shrink=0.9)
    fig.tight_layout()
    fig.savefig(job.out, dpi=150)
    plt.close(fig)
    return {"eta_K": eta, "err_K": err}


KINDS = {
    "convergence": plot_convergence,
    "adaptive": plot_adaptive,
    "heatmap": plot_heatmap,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", choices=sorted(KINDS), required=True)
    ap.add_argument("--in", dest="inputs", nargs="+", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    job = PlotJob(kind=args.kind, inputs=args.inputs, out=args.out)
    KINDS[args.kind](job)
    print("wrote", args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Adaptive scattering experiment on the bundled obstacle mesh.

Emits the iteration history CSV and per-iteration mesh/estimator
snapshots suitable for the heatmap plots."""

import argparse
import os

import numpy as np

from helmfem.cli import RunConfig, cmd_scattering


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=float, default=2 * np.pi)
    ap.add_argument("--p", type=int, default=1)
    ap.add_argument("--iters", type=int, default=15)
    ap.add_argument("--nu", type=float, default=np.pi / 3)
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)
    tag = f"scattering_k{args.k / np.pi:g}pi_p{args.p}"
    cfg = RunConfig(command="scattering", k=args.k, degree=args.p,
                    nu=args.nu, iterations=args.iters,
                    out=os.path.join(args.out_dir, tag + ".csv"),
                    snapshot_dir=os.path.join(args.out_dir, tag + "_snapshots"))
    cmd_scattering(cfg)
    print("wrote", cfg.out)


if __name__ == "__main__":
    main()

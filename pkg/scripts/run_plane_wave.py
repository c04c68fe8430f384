#!/usr/bin/env python3
"""Run the uniform-mesh plane-wave effectivity sweeps.

Writes one CSV per (k, p) pair into the output directory.  The defaults
cover the acceptance subsets; pass --full for the larger sweeps (several
minutes at the finest meshes).
"""

import argparse
import os

import numpy as np

from helmfem.cli import RunConfig, cmd_plane_wave

SUBSETS = [
    (np.pi, 1, (8, 16, 32, 64, 128)),
    (10 * np.pi, 2, (32, 64, 128)),
    (10 * np.pi, 4, (32, 64)),
]

FULL = [
    (np.pi, 1, (8, 16, 32, 64, 128, 256, 512)),
    (4 * np.pi, 1, (8, 16, 32, 64, 128, 256, 512)),
    (10 * np.pi, 2, (32, 64, 128, 256)),
    (10 * np.pi, 4, (32, 64, 128, 256)),
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)
    for k, p, ns in (FULL if args.full else SUBSETS):
        name = f"plane_wave_k{k / np.pi:g}pi_p{p}.csv"
        path = os.path.join(args.out_dir, name)
        cmd_plane_wave(RunConfig(command="plane-wave", k=k, degree=p,
                                 n_values=ns, out=path))
        print("wrote", path)


if __name__ == "__main__":
    main()

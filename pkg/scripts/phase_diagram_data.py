#!/usr/bin/env python3
"""Emit plot-ready phase-diagram data for the (7,5) and (4,2) benchmark models.

Writes, per model, a classified grid CSV, the strongly-critical curve CSV
(when non-empty), and a landmarks JSON into the output directory.
"""

import argparse
import json
import pathlib

import tensorpotts as tp
from tensorpotts.phase import curve_to_csv


def emit(p, q, beta_max, h_max, resolution, curve_samples, outdir):
    tag = f"p{p}_q{q}"
    bc = tp.compute_beta_c(p, q)
    sp = tp.compute_special_point(p, q)
    curve = tp.critical_curve(p, q, curve_samples, beta_c=bc, special=sp)
    diagram = tp.phase_diagram(p, q, (1e-3, beta_max), (0.0, h_max), resolution,
                               curve_samples=max(curve_samples // 4, 8) if curve else 8)

    grid_path = outdir / f"phase_grid_{tag}.csv"
    with open(grid_path, "w") as fh:
        fh.write("beta,h,tag\n")
        for i, h in enumerate(diagram.h_values):
            for j, b in enumerate(diagram.beta_values):
                fh.write("%.17g,%.17g,%s\n" % (b, h, diagram.tags[i, j].value))

    landmarks = {
        "beta_c": bc,
        "beta_tilde": sp.beta_tilde,
        "h_tilde": sp.h_tilde,
        "s_pq": sp.s_pq,
        "type": sp.type,
    }
    (outdir / f"landmarks_{tag}.json").write_text(json.dumps(landmarks, indent=2))

    if curve:
        curve_to_csv(curve, outdir / f"critical_curve_{tag}.csv")
    print(f"({p},{q}): beta_c = {bc:.8f}, special = ({sp.beta_tilde:.8f}, "
          f"{sp.h_tilde:.8f}) type {sp.type}, curve samples = {len(curve)}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", type=pathlib.Path, default=pathlib.Path("out"))
    ap.add_argument("--resolution", type=int, default=41)
    ap.add_argument("--curve-samples", type=int, default=400)
    args = ap.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)

    emit(7, 5, beta_max=3.3, h_max=2.2, resolution=args.resolution,
         curve_samples=args.curve_samples, outdir=args.outdir)
    emit(4, 2, beta_max=1.4, h_max=0.7, resolution=args.resolution,
         curve_samples=args.curve_samples, outdir=args.outdir)


if __name__ == "__main__":
    main()

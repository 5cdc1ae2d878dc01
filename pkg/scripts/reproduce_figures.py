#!/usr/bin/env python3
"""Run the three figure presets (homogeneous, concentrated, ODE legs).

Writes one run directory per leg under --out.  At the published agent
counts the particle legs take hours on a laptop; --scale divides N for a
quick desk pass (fractions are N-independent to leading order, so scaled
runs stay qualitatively faithful).  The plotting package consumes these
directories as-is.
"""

import argparse
import sys
from pathlib import Path

from simlab.cli import preset_config, run_experiment


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("--figures", nargs="+", default=["fig1", "fig2", "fig3"],
                    choices=["fig1", "fig2", "fig3"])
    ap.add_argument("--scale", type=int, default=1,
                    help="divide the preset agent counts by this factor")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--overwrite", action="store_true")
    return ap.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    for name in args.figures:
        for variant in ("homog", "conc", "ode"):
            cfg = preset_config(name, variant)
            cfg.seed = args.seed
            if variant != "ode" and args.scale > 1:
                cfg.N = max(1000, cfg.N // args.scale)
            out = args.out / f"{name}-{variant}"
            manifest = run_experiment(cfg, out, overwrite=args.overwrite)
            print(f"{name}/{variant}: N={cfg.N or '-'} -> {out} "
                  f"({manifest['wall_time_s']}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())

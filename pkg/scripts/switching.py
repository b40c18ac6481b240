"""Gate switching fidelity versus sweep time, and repeated transfer cycles.

    python scripts/switching.py --L 3 --cycles 10
"""

import argparse
from pathlib import Path

import numpy as np

from hubbard_qst.cli import write_csv
from hubbard_qst.protocols import (CYCLE_PROTOCOLS, clean_optimum, repeated_cycles, switching_curve,
                                   table_row)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=3)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--max-fraction", type=float, default=0.3,
                    help="largest tau_sw as a fraction of tau_opt")
    ap.add_argument("--points", type=int, default=31)
    ap.add_argument("--cycles", type=int, default=10)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/switching"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    cfg = table_row(args.L, args.n).config
    tau_opt = clean_optimum(cfg)
    grid = np.linspace(0.0, args.max_fraction * tau_opt, args.points)
    curve = switching_curve(cfg, grid, workers=args.workers)
    write_csv(args.out / "switching.csv", ["tau_sw", "tau_sw_over_tau_opt", "open_to_closed",
                                           "closed_to_open"],
              zip(grid, grid / tau_opt, curve.open_to_closed, curve.closed_to_open))
    print(f"tau_opt = {tau_opt:g}; best open->closed {curve.open_to_closed.max():.5f}")

    if args.cycles:
        runs = {p: repeated_cycles(cfg, args.cycles, protocol=p) for p in CYCLE_PROTOCOLS}
        m = runs[CYCLE_PROTOCOLS[0]].m
        write_csv(args.out / "cycles.csv", ["m", *CYCLE_PROTOCOLS],
                  zip(m, *(runs[p].fidelity for p in CYCLE_PROTOCOLS)))
        for p, r in runs.items():
            print(f"{p}: " + " ".join(f"{f:.3f}" for f in r.fidelity))


if __name__ == "__main__":
    main()

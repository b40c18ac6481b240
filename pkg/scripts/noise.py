"""Robustness curves: temperature, dephasing, spin-orbit coupling and disorder.

    python scripts/noise.py --n-real 500 --workers 1
"""

import argparse
from pathlib import Path

import numpy as np

from hubbard_qst.cli import write_csv
from hubbard_qst.protocols import clean_optimum, disorder_average, noise_sweep, table_row

GRIDS = {
    "kT": np.linspace(0.0, 0.4, 9),
    "gamma": np.linspace(0.0, 0.004, 9),
    "alpha": np.linspace(0.0, 0.02, 9),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=3)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.0, 0.02, 0.04, 0.06, 0.08, 0.1])
    ap.add_argument("--n-real", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/noise"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    cfg = table_row(args.L, args.n).config
    tau_opt = clean_optimum(cfg)
    for kind, grid in GRIDS.items():
        c = noise_sweep(cfg, kind, grid, tau_opt=tau_opt, workers=args.workers)
        write_csv(args.out / f"{kind}.csv", [kind, "f_open", "f_closed"],
                  zip(c.grid, c.f_open, c.f_closed))
        print(f"{kind}: F_open at max {c.f_open[-1]:.4f}, F_closed {c.f_closed[-1]:.4f}")

    rows = []
    for lam in args.lambdas:
        for pms in (True, False):
            d = disorder_average(cfg, lam, args.n_real, preserve_ms=pms, seed=args.seed,
                                 tau_opt=tau_opt, workers=args.workers)
            rows.append([lam, "PMS" if pms else "BMS", d.mean_open, d.stderr_open,
                         d.mean_closed, d.stderr_closed])
            print(f"lambda={lam:g} {rows[-1][1]}: open {d.mean_open:.4f} +- {d.stderr_open:.4f}")
    write_csv(args.out / "disorder.csv",
              ["lambda", "class", "f_open", "se_open", "f_closed", "se_closed"], rows)


if __name__ == "__main__":
    main()

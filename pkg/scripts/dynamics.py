"""Time series for one device: both fidelities, negativity and site occupancies.

    python scripts/dynamics.py --L 3 --n 1 --tau-max 200
"""

import argparse
from pathlib import Path

import numpy as np

from hubbard_qst.cli import write_series
from hubbard_qst.protocols import run_transistor, table_row


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=3)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--tau-max", type=float, default=200.0)
    ap.add_argument("--dtau", type=float, default=0.5)
    ap.add_argument("--no-chi", action="store_true", help="skip the negativity column")
    ap.add_argument("--out", type=Path, default=Path("results/dynamics"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    cfg = table_row(args.L, args.n).config
    taus = np.arange(0.0, args.tau_max + args.dtau / 2, args.dtau)
    rec = run_transistor(cfg, taus=taus, chi=not args.no_chi)
    path = args.out / f"series_L{args.L}_n{args.n}.csv"
    write_series(path, rec, args.L)
    print(f"peak {rec.peak:.5f} at t*tau = {rec.tau_opt:g}; min F_closed {rec.f_closed.min():.5f}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()

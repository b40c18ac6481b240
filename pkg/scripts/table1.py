"""Recompute the reference table: open peak, its time, and the closed-mode minimum.

    python scripts/table1.py --out results/table1 [--all]

Rows with n > 1 take minutes each on one core and are skipped unless --all.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from hubbard_qst.cli import write_csv
from hubbard_qst.protocols import MODES, TABLE_I, run_transistor


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/table1"))
    ap.add_argument("--all", action="store_true", help="include the n > 1 rows")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    body = []
    for row in TABLE_I:
        if row.slow and not args.all:
            continue
        start = time.perf_counter()
        rec = run_transistor(row.config, MODES, occupancy=False)
        f_closed = float(np.min(rec.f_closed))
        body.append([row.L, row.n, rec.peak, rec.tau_opt, f_closed, row.f_open, row.tau_opt,
                     rec.peak - row.f_open])
        print(f"L={row.L} n={row.n}: F_open {rec.peak:.4f} at {rec.tau_opt:g} "
              f"(ref {row.f_open} at {row.tau_opt:g}), min F_closed {f_closed:.4f}, "
              f"{time.perf_counter() - start:.1f} s", flush=True)
    write_csv(args.out / "table1.csv",
              ["L", "n", "f_open", "tau_opt", "f_closed_min", "f_open_ref", "tau_opt_ref", "delta"],
              body)


if __name__ == "__main__":
    main()

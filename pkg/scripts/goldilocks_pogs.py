#!/usr/bin/env python3
"""Reproduce the planning-frequency sweep: success and backtracking vs k.

Writes out/sweep.csv and prints the paired comparison against always-plan
and never-plan.
"""

import argparse

from dynaplan.analytics import (goldilocks_sweep, paired_gap,
                                sweep_rows_for_csv, write_csv)
from dynaplan.configs import DEFAULT_SWEEP_KS, DEFAULT_SWEEP_POGS
from dynaplan.envs import make_env


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-seeds", type=int, default=200)
    parser.add_argument("--master-seed", type=int, default=0)
    parser.add_argument("--out", default="out/sweep.csv")
    args = parser.parse_args()

    result = goldilocks_sweep(
        lambda s: make_env("pogs", DEFAULT_SWEEP_POGS, s),
        DEFAULT_SWEEP_KS, args.n_seeds, master_seed=args.master_seed)

    for row in result.rows:
        print(f"k={row.label:>5}: score {row.mean_score:.3f}±{row.se_score:.3f}"
              f"  backtracks {row.mean_backtracks:5.2f}"
              f"  output tokens {row.mean_output_tokens:7.1f}")

    rows = {r.k: r for r in result.rows}
    argmax = max((rows[k] for k in (2, 4, 8)),
                 key=lambda r: (r.mean_score, -(r.k or 0)))
    print(f"\ninterior argmax: k={argmax.label}")
    for ref in (1, None):
        gap, se = paired_gap(argmax.scores, rows[ref].scores)
        print(f"  score vs k={rows[ref].label}: {gap:+.3f} ± {se:.3f}")
    for ref in (1, None):
        gap, se = paired_gap(rows[ref].backtracks, argmax.backtracks)
        print(f"  backtracks k={rows[ref].label} minus argmax: "
              f"{gap:+.2f} ± {se:.2f}")
    write_csv(args.out, sweep_rows_for_csv(result))
    print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()

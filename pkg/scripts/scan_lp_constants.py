#!/usr/bin/env python3
"""Scan empirical transform norm ratios over a grid of integrability exponents.

For each p on the grid, draws random witnesses and unit-ball multiplier
sequences and records the largest observed ||Tf||_p / ||f||_p.  At p = 2
the maximum doubles as a contraction check and should stay at or below 1;
away from 2 the number is a measured constant, not a proved bound.

Usage:
    python3 scripts/scan_lp_constants.py --trials 500 --seed 11
    python3 scripts/scan_lp_constants.py --p-grid 1.2 1.5 2 3 4 --delta 0.25
"""

import argparse

from mblab.estimator import lp_constant_scan


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p-grid", type=float, nargs="+", default=[1.1, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0])
    ap.add_argument("--trials", type=int, default=400)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--delta", type=float, default=0.5)
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--depth", type=int, default=None)
    args = ap.parse_args()

    print(f"delta={args.delta:g} dim={args.dim} trials={args.trials} seed={args.seed}")
    print(f"{'p':>6s} {'max ratio':>12s} {'mean ratio':>12s}  argmax trial")
    contraction_ok = True
    for p in args.p_grid:
        res = lp_constant_scan(
            p, args.trials, args.seed, delta=args.delta, dim=args.dim, depth=args.depth
        )
        mark = ""
        if p == 2.0:
            ok = res.max_ratio <= 1.0 + 1e-9
            contraction_ok = contraction_ok and ok
            mark = "  contraction " + ("ok" if ok else "VIOLATED")
        am = res.argmax
        where = f"trial={am.get('trial')} depth={am.get('depth')}" if am else ""
        print(f"{p:6.2f} {res.max_ratio:12.9f} {res.mean_ratio:12.9f}  {where}{mark}")
    return 0 if contraction_ok else 1


if __name__ == "__main__":
    raise SystemExit(main())

#!/usr/bin/env python3
"""Sweep the witness corpus and print the worst error of every check row.

Runs every identity and inequality suite over the full randomized corpus
(every regularity floor and value dimension, many seeds per cell) and reports
the worst err/tol ratio per check, plus the two quantities the acceptance
gate probes directly: the two-sided restriction gap, which is expected to
be large because only the one-sided inequality holds, and the mean bound
margin, which must stay nonpositive.

Usage:
    python3 scripts/run_acceptance_corpus.py --seeds 25
"""

import argparse
from collections import defaultdict

import numpy as np

from mblab.checks import run_all
from mblab.corpus import default_corpus, prepare_cell
from mblab.filtration import split_schedule
from mblab.martingale import average, lp_norm, osc2, restrict


def restriction_gap(f, g, op) -> float:
    """Worst relative gap in the two-sided restriction identity."""
    filt = f.filtration
    tstar = op.adjoint_apply(g)
    worst = 0.0
    for ev in split_schedule(filt):
        atom = filt.atom(ev.atom)
        if atom.parent is None:
            continue
        local = osc2(tstar, ev.atom)
        cut = op.adjoint_apply(restrict(g, ev.atom))
        glob = (filt.total_measure / atom.measure) * osc2(cut, filt.root.id)
        worst = max(worst, abs(local - glob) / max(local, glob, 1e-30))
    return worst


def mean_margin(f, g, op, p: float, q: float) -> float:
    """Signed margin of the averaged mean product bound; must be <= 0."""
    filt = f.filtration
    root = filt.root.id
    lhs = abs(float(np.dot(average(f, root), average(op.adjoint_apply(g), root))))
    rhs = lp_norm(f, p) * lp_norm(g, q) / filt.total_measure
    return lhs - rhs


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=100, help="seeds per (delta, dim) cell")
    ap.add_argument("--suites", type=str, default=None, help="comma separated suite names")
    args = ap.parse_args()

    suites = [s.strip() for s in args.suites.split(",")] if args.suites else None
    rng = np.random.default_rng(0)
    worst = defaultdict(lambda: (0.0, None))
    eq_worst, margin_worst = 0.0, -np.inf
    all_ok = True
    cells = default_corpus(seeds=args.seeds)
    for cell in cells:
        pc = prepare_cell(cell)
        rows, ok = run_all(pc.f, pc.g, pc.op, rng=rng, suites=suites)
        all_ok = all_ok and ok
        for row in rows:
            ratio = row["max_err"] / row["tol"] if row["tol"] > 0 else float(row["max_err"] > 0)
            if ratio > worst[row["check"]][0]:
                worst[row["check"]] = (ratio, cell)
        eq_worst = max(eq_worst, restriction_gap(pc.f, pc.g, pc.op))
        margin_worst = max(margin_worst, mean_margin(pc.f, pc.g, pc.op, 2.0, 2.0))

    print(f"{len(cells)} cells")
    print(f"{'check':28s} {'worst err/tol':>14s}  worst cell")
    for name in sorted(worst):
        ratio, cell = worst[name]
        where = f"delta={cell.delta:g} dim={cell.dim} seed={cell.seed}" if cell else ""
        print(f"{name:28s} {ratio:14.3e}  {where}")
    print(f"\nrestriction equality gap (two-sided, expected large): {eq_worst:.3e}")
    print(f"mean bound margin (must be <= 0): {margin_worst:.3e}")
    print("all suites ok" if all_ok else "SOME SUITE FAILED")
    return 0 if all_ok else 1


if __name__ == "__main__":
    raise SystemExit(main())

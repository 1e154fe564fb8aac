"""Shared fixtures.

Unit tests lean on a handful of cheap prepared cells.  The acceptance
suite walks the full randomized corpus once per session; the heavy per
cell sweep (all check suites plus a restriction equality probe and a
mean bound margin) is cached here so each criterion only scans rows.
"""

from __future__ import annotations

import numpy as np
import pytest

from mblab.checks import run_all
from mblab.corpus import CorpusCell, default_corpus, prepare_cell
from mblab.filtration import build_dyadic, split_schedule
from mblab.martingale import average, lp_norm, osc2, pointwise_dot, restrict


@pytest.fixture(scope="session")
def dyadic1():
    return build_dyadic(1)


@pytest.fixture(scope="session")
def dyadic2():
    return build_dyadic(2)


@pytest.fixture(scope="session")
def dyadic3():
    return build_dyadic(3)


@pytest.fixture(scope="session")
def small_cells():
    # one cell per (delta, dim) pair keeps unit runs quick
    cells = [
        CorpusCell(delta, dim, seed=0)
        for delta in (0.1, 0.25, 1.0 / 3.0, 0.5)
        for dim in (1, 2, 3)
    ]
    return [prepare_cell(c) for c in cells]


def restriction_equality_relerr(f, g, op) -> float:
    """Worst relative gap in the two-sided restriction identity over all
    split atoms: local oscillation of T* g versus the rescaled global
    oscillation of T* applied to g cut to the atom."""
    filt = f.filtration
    tstar_g = op.adjoint_apply(g)
    root = filt.root.id
    total = filt.total_measure
    worst = 0.0
    for ev in split_schedule(filt):
        if ev.atom == root:
            continue
        atom = filt.atom(ev.atom)
        local = osc2(tstar_g, atom.id)
        cut = op.adjoint_apply(restrict(g, atom.id))
        glob = (total / atom.measure) * osc2(cut, root)
        worst = max(worst, abs(local - glob) / max(local, glob, 1e-30))
    return worst


def telescoping_relerr(f, g, op) -> float:
    """Relative gap between the split-pairing sum and the direct pairing
    against the centered input."""
    from mblab.martingale import delta_split, inner

    filt = f.filtration
    tstar_g = op.adjoint_apply(g)
    lhs = 0.0
    for ev in split_schedule(filt):
        lhs += inner(delta_split(tstar_g, ev), delta_split(f, ev))
    centered = f.shift(-average(f, filt.root.id))
    rhs = inner(g, op.apply(centered))
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def hoelder_margin(f, g, op, p: float, q: float) -> float:
    """How far |<f>_I . <T* g>_I| sits above ||f||_p ||g||_q / |I|;
    nonpositive when the mean bound holds."""
    filt = f.filtration
    root = filt.root.id
    lhs = abs(float(np.dot(average(f, root), average(op.adjoint_apply(g), root))))
    rhs = lp_norm(f, p) * lp_norm(g, q) / filt.total_measure
    return lhs - rhs


@pytest.fixture(scope="session")
def corpus_report():
    """Full corpus sweep: check-suite rows plus acceptance-only probes."""
    report = []
    rng = np.random.default_rng(20240817)
    for cell in default_corpus():
        pc = prepare_cell(cell)
        rows, ok = run_all(pc.f, pc.g, pc.op, rng=rng)
        report.append(
            {
                "cell": cell,
                "prepared": pc,
                "rows": {r["check"]: r for r in rows},
                "suite_ok": ok,
                "restriction_eq": restriction_equality_relerr(pc.f, pc.g, pc.op),
                "telescoping": telescoping_relerr(pc.f, pc.g, pc.op),
                "hoelder_margin": hoelder_margin(pc.f, pc.g, pc.op, 2.0, 2.0),
            }
        )
    return report

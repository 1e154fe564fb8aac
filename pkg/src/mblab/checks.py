"""Named identity and inequality suites over a witness triple.

Each suite returns rows of the form {check, max_err, tol, ok, detail} and
never raises on a violation: callers decide what a red row means.  The
suites cover the split-difference projection algebra, transform
localization, predictable support, the oscillation series, the x2 drop
accounting, nonnegativity of the x2 slot, the one-sided restriction bound,
and the L2 contraction.

A note on the restriction bound: localizing g to an atom J and measuring
the oscillation of T* applied to the localized function over the whole
interval picks up contributions from strict ancestors of J, so equality
with the local oscillation fails in general; only the <= direction holds,
and that is the direction the nonnegativity of x2 rests on.  The suite
tests the inequality.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .filtration import split_schedule
from .martingale import (
    MartFunction,
    average,
    delta_split,
    inner,
    l2_norm,
    osc2,
    pointwise_dot,
    restrict,
)
from .transforms import MartingaleTransform, operator_norm, predictable_hull
from .corpus import active_split_function, random_function

__all__ = [
    "Tolerances",
    "SUITES",
    "run_suite",
    "run_all",
    "check_projections",
    "check_localization",
    "check_support",
    "check_osc_series",
    "check_x2_drop",
    "check_x2_sign",
    "check_restriction",
    "check_contraction",
]


@dataclass(frozen=True)
class Tolerances:
    """Absolute tolerance rungs; ``scale`` multiplies every rung."""

    scale: float = 1.0

    @property
    def exact(self) -> float:
        # Identities that hold by cancellation of identical accumulations.
        return 1e-12 * self.scale

    @property
    def tight(self) -> float:
        return 1e-9 * self.scale

    @property
    def loose(self) -> float:
        return 1e-6 * self.scale

    @staticmethod
    def from_env() -> "Tolerances":
        scale = float(os.environ.get("MBL_TOL", "1.0"))
        if not scale > 0.0:
            raise ValueError(f"MBL_TOL must be a positive scale, got {scale}")
        return Tolerances(scale=scale)


def _row(name: str, err: float, tol: float, detail: str = "") -> dict:
    return {
        "check": name,
        "max_err": float(err),
        "tol": float(tol),
        "ok": bool(err <= tol),
        "detail": detail,
    }


def check_projections(
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    tol: Tolerances,
    rng: np.random.Generator,
) -> list[dict]:
    """Split differences behave as orthogonal projections with mutually
    orthogonal ranges, and they telescope the centered function."""
    filt = f.filtration
    events = split_schedule(filt)
    scale = max(1.0, l2_norm(f) ** 2)

    idem = 0.0
    selfadj = 0.0
    aux = random_function(filt, f.dim, rng)
    for ev in events:
        df = delta_split(f, ev)
        idem = max(idem, float(np.max(np.abs(delta_split(df, ev).values - df.values))))
        selfadj = max(selfadj, abs(inner(df, aux) - inner(f, delta_split(aux, ev))))

    ortho = 0.0
    pieces = [delta_split(f, ev) for ev in events]
    other = [delta_split(aux, ev) for ev in events]
    for i in range(len(events)):
        for j in range(len(events)):
            if i != j:
                ortho = max(ortho, abs(inner(pieces[i], other[j])))

    total = pieces[0]
    for piece in pieces[1:]:
        total = total + piece
    centered = f.shift(-average(f, filt.root.id))
    tele = float(np.max(np.abs(total.values - centered.values)))

    return [
        _row("projection_idempotent", idem, tol.tight, "delta applied twice"),
        _row("projection_self_adjoint", selfadj, tol.tight * scale, "pairing symmetry"),
        _row("projection_orthogonal", ortho, tol.tight * scale, "cross pairings"),
        _row("projection_telescoping", tele, tol.tight * max(1.0, scale), "sum of pieces"),
    ]


def check_localization(
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    tol: Tolerances,
    rng: np.random.Generator,
) -> list[dict]:
    """Single-split inputs localize: T of a split difference at J is
    supported in J, and the adjoint commutes with the split difference up to
    the multiplier of that atom."""
    filt = f.filtration
    outside = 0.0
    commute = 0.0
    tstar_g = op.adjoint_apply(g)
    for ev in split_schedule(filt):
        h = delta_split(random_function(filt, f.dim, rng), ev)
        th = op.apply(h)
        sl = filt.leaf_slice(ev.atom)
        mask = np.ones(filt.n_leaves, dtype=bool)
        mask[sl] = False
        if mask.any():
            outside = max(outside, float(np.max(np.abs(th.values[mask]))))

        atom = filt.atom(ev.atom)
        level = atom.level  # multiplier index for the split creating level+1
        part = filt.levels[level]
        a_row = op.multipliers[level][part.index(atom.id)]
        dsg = delta_split(g, ev)
        dtg = delta_split(tstar_g, ev)
        commute = max(
            commute,
            float(np.max(np.abs(dtg.values - a_row[None, :] * dsg.values))),
        )
    return [
        _row("localization_support", outside, tol.exact, "T of split piece outside atom"),
        _row("localization_adjoint", commute, tol.tight, "adjoint split vs multiplier"),
    ]


def check_support(
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    tol: Tolerances,
    rng: np.random.Generator,
) -> list[dict]:
    """Transforms of functions built from a known active split set stay
    supported in the union of those atoms, exactly."""
    filt = f.filtration
    h, active = active_split_function(filt, f.dim, rng)
    th = op.apply(h)
    covered = np.zeros(filt.n_leaves, dtype=bool)
    for atom_id in active:
        covered[filt.leaf_slice(atom_id)] = True
    err = 0.0
    if (~covered).any():
        err = float(np.max(np.abs(th.values[~covered])))

    hull = predictable_hull(op, h)
    hull_err = 0.0
    for level_atoms in hull:
        for atom_id in level_atoms:
            if atom_id not in active:
                hull_err += 1.0
    return [
        _row("support_containment", err, tol.exact, f"{len(active)} active atoms"),
        _row("support_hull", hull_err, 0.0, "hull atoms outside the active set"),
    ]


def check_osc_series(
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    tol: Tolerances,
    rng: np.random.Generator,
) -> list[dict]:
    """Mean squared oscillation over an atom equals the normalized sum of
    squared split differences of atoms inside it."""
    filt = f.filtration
    tstar_g = op.adjoint_apply(g)
    events = split_schedule(filt)
    piece_sq = {ev.atom: inner(delta_split(tstar_g, ev), delta_split(tstar_g, ev)) for ev in events}
    err = 0.0
    for atom in filt.atoms:
        if atom.is_leaf:
            continue
        direct = osc2(tstar_g, atom.id)
        series = sum(
            sq
            for q_id, sq in piece_sq.items()
            if filt.atom(q_id).a >= atom.a - 1e-15 and filt.atom(q_id).b <= atom.b + 1e-15
        ) / atom.measure
        err = max(err, abs(direct - series) / max(1.0, direct))
    return [_row("osc_series", err, tol.tight, "series vs direct, relative")]


def _x2_of(g: MartFunction, tstar_g: MartFunction, atom_id: int) -> float:
    g2 = float(average(pointwise_dot(g, g), atom_id)[0])
    return g2 - osc2(tstar_g, atom_id)


def check_x2_drop(
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    tol: Tolerances,
    rng: np.random.Generator,
) -> list[dict]:
    """Across one split the weighted x2 of the children exceeds the parent
    x2 by exactly the squared displacement."""
    from .certifier import split_displacement

    filt = f.filtration
    tstar_g = op.adjoint_apply(g)
    err = 0.0
    for ev in split_schedule(filt):
        atom = filt.atom(ev.atom)
        d = split_displacement(tstar_g, ev)
        gain = (
            sum(
                filt.atom(c).measure / atom.measure * _x2_of(g, tstar_g, c)
                for c in atom.children
            )
            - _x2_of(g, tstar_g, atom.id)
        )
        err = max(err, abs(gain - d * d) / max(1.0, d * d))
    return [_row("x2_drop", err, tol.tight, "weighted x2 gain vs d^2, relative")]


def check_x2_sign(
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    tol: Tolerances,
    rng: np.random.Generator,
) -> list[dict]:
    """The x2 slot is nonnegative on every atom (oscillation of the adjoint
    never exceeds the local second moment of g)."""
    filt = f.filtration
    tstar_g = op.adjoint_apply(g)
    worst = 0.0
    for atom in filt.atoms:
        g2 = float(average(pointwise_dot(g, g), atom.id)[0])
        x2 = g2 - osc2(tstar_g, atom.id)
        worst = min(worst, x2 / max(g2, 1e-300))
    rows = [_row("x2_sign", max(0.0, -worst), tol.exact, "most negative x2, relative")]
    # root form keeps the squared mean of the adjoint on the right hand side
    root = filt.root.id
    g2_root = float(average(pointwise_dot(g, g), root)[0])
    x2_root = g2_root - osc2(tstar_g, root)
    mean_sq = float(np.sum(average(tstar_g, root) ** 2))
    rows.append(
        _row(
            "x2_root_mean_bound",
            max(0.0, mean_sq - x2_root),
            1e-10 * tol.scale,
            "squared adjoint mean minus root x2",
        )
    )
    return rows


def check_restriction(
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    tol: Tolerances,
    rng: np.random.Generator,
) -> list[dict]:
    """One-sided restriction bound: the local oscillation of T* g over J is
    dominated by the rescaled global oscillation of T* applied to g cut to
    J.  Ancestor splits make the global side strictly larger in general."""
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
        worst = max(worst, (local - glob) / max(1.0, local))
    return [_row("restriction_bound", worst, tol.tight, "local minus rescaled global")]


def check_contraction(
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    tol: Tolerances,
    rng: np.random.Generator,
) -> list[dict]:
    """Norm bound and agreement of the two application routes."""
    norm = operator_norm(op)
    tf = op.apply(f)
    tf_m = op.matrix_apply(f)
    route = float(np.max(np.abs(tf.values - tf_m.values)))
    ratio = l2_norm(tf) / max(l2_norm(f), 1e-300)
    adj = op.adjoint_apply(g)
    adj_c = op.adjoint_closed_form(g)
    adj_route = float(np.max(np.abs(adj.values - adj_c.values)))
    pair = abs(inner(tf, g) - inner(f, adj)) / max(1.0, abs(inner(tf, g)))
    return [
        _row("contraction_norm", max(0.0, norm - 1.0), tol.tight, "operator norm minus 1"),
        _row("contraction_ratio", max(0.0, ratio - 1.0), tol.tight, "witness ratio minus 1"),
        _row("apply_routes", route, tol.tight, "multiplier vs matrix route"),
        _row("adjoint_routes", adj_route, tol.tight, "weighted transpose vs closed form"),
        _row("adjoint_pairing", pair, tol.tight, "duality of the two applications"),
    ]


SUITES = {
    "projections": check_projections,
    "localization": check_localization,
    "support": check_support,
    "osc_series": check_osc_series,
    "x2_drop": check_x2_drop,
    "x2_sign": check_x2_sign,
    "restriction": check_restriction,
    "contraction": check_contraction,
}


def run_suite(
    name: str,
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    tol: Tolerances,
    rng: np.random.Generator,
) -> list[dict]:
    if name not in SUITES:
        raise KeyError(f"unknown check suite '{name}'; known: {sorted(SUITES)}")
    return SUITES[name](f, g, op, tol, rng)


def run_all(
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    tol: Tolerances | None = None,
    rng: np.random.Generator | None = None,
    suites: list[str] | None = None,
) -> tuple[list[dict], bool]:
    tol = tol or Tolerances()
    rng = rng if rng is not None else np.random.default_rng(0)
    rows: list[dict] = []
    for name in suites or list(SUITES):
        rows.extend(run_suite(name, f, g, op, tol, rng))
    return rows, all(r["ok"] for r in rows)

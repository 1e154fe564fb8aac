"""Certificate machinery: from a candidate and a witness to a global bound.

The certifier walks the refiltration schedule of a witness triple
(f, g, T).  At every split atom J it records the moment points of J and of
its children, the convex weights, the displacement scale

    d_J = |J|^{-1/2} || single-split difference of T* g on J ||,

the spread of the child x1 components, and the slack of the split
inequality.  Summing the per-split inequalities against the telescoping of
the pairing integral yields

    B(x_root) - objective
        = (1/|I|) [ sum_J |J| slack_J
                    + sum_J |J| (|d_J| diam_J - pairing_J)
                    + sum_leaves |L| B(x_L) ],

an exact bookkeeping identity for any candidate.  The certificate succeeds
when all three bracketed families are nonnegative within tolerance, which
forces objective <= B(x_root).  A failed certificate is a first-class
result: it carries every violating record and the reasons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bellman import BellmanCandidate, BellmanPoint, bellman_point
from .filtration import SplitEvent, split_schedule
from .martingale import MartFunction, delta_split, inner
from .transforms import MartingaleTransform

__all__ = [
    "SplitRecord",
    "Certificate",
    "CertificationError",
    "split_displacement",
    "split_pairing",
    "certify",
    "certificate_to_dict",
    "certificate_rows",
]

_CERT_TOL = 1e-9


class CertificationError(RuntimeError):
    """Internal identity broke down; the witness data cannot be trusted."""


@dataclass(frozen=True)
class SplitRecord:
    """Everything the split inequality sees at one schedule step."""

    atom: int
    level: int
    measure: float
    weights: tuple[float, ...]
    d: float
    diameter: float
    pairing: float
    slack: float
    base: BellmanPoint
    children: tuple[BellmanPoint, ...]


@dataclass(frozen=True, eq=False)
class Certificate:
    ok: bool
    label: str
    p: float
    candidate_delta: float
    filtration_delta: float
    objective: float
    root: BellmanPoint
    bound: float
    final_slack: float
    records: tuple[SplitRecord, ...]
    leaves: tuple[BellmanPoint, ...]
    leaf_values: tuple[float, ...]
    leaf_term: float
    identity_residual: float
    failures: tuple[str, ...]

    @property
    def first_failure(self) -> str | None:
        return self.failures[0] if self.failures else None

    @property
    def failing_records(self) -> tuple[SplitRecord, ...]:
        """Records behind the failure messages: materially negative slack or
        a broken pairing domination step."""
        bad = []
        for rec in self.records:
            scale = max(1.0, abs(rec.pairing), abs(rec.d) * rec.diameter)
            if rec.slack < -_CERT_TOL * scale or rec.d * rec.diameter < rec.pairing - _CERT_TOL * scale:
                bad.append(rec)
        return tuple(bad)


def split_displacement(tstar_g: MartFunction, event: SplitEvent) -> float:
    """Root mean square of the single-split difference of T* g over the
    split atom, the d entering the split inequality."""
    diff = delta_split(tstar_g, event)
    filt = tstar_g.filtration
    atom = filt.atom(event.atom)
    sl = filt.leaf_slice(atom.id)
    m = filt.leaf_measures()[sl]
    sq = float(m @ np.einsum("ij,ij->i", diff.values[sl], diff.values[sl]))
    return math.sqrt(max(sq, 0.0) / atom.measure)


def split_pairing(
    f: MartFunction, tstar_g: MartFunction, event: SplitEvent
) -> float:
    """Normalized pairing of the two single-split differences on the atom."""
    df = delta_split(f, event)
    dg = delta_split(tstar_g, event)
    return inner(df, dg) / f.filtration.atom(event.atom).measure


def certify(
    cand: BellmanCandidate,
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    tol: float = _CERT_TOL,
) -> Certificate:
    """Run the full schedule walk and assemble the certificate.

    Raises ValueError if the candidate claims a regularity floor above the
    filtration's, and CertificationError if an exact identity (displacement
    accounting, telescoping) fails beyond roundoff.  Candidate violations
    (negative slack, negative leaf value, broken pairing domination) do not
    raise; they mark the certificate failed.
    """
    filt = f.filtration
    if g.filtration is not filt or op.filtration is not filt:
        raise ValueError("witness components live on different filtrations")
    if g.dim != 1:
        raise ValueError("g must be scalar valued")
    if f.dim != op.dim:
        raise ValueError(f"f has dim {f.dim} but the transform expects {op.dim}")
    if cand.delta > filt.delta + 1e-12:
        raise ValueError(
            f"candidate floor delta={cand.delta:g} exceeds the filtration's "
            f"regularity delta={filt.delta:g}"
        )

    p = cand.p
    tstar_g = op.adjoint_apply(g)
    tf = op.apply(f)
    total = filt.total_measure
    objective = inner(g, tf) / total

    point_cache: dict[int, BellmanPoint] = {}

    def point(atom_id: int) -> BellmanPoint:
        if atom_id not in point_cache:
            point_cache[atom_id] = bellman_point(f, g, op, atom_id, p, tstar_g=tstar_g)
        return point_cache[atom_id]

    failures: list[str] = []
    records: list[SplitRecord] = []
    weighted_slack = 0.0
    weighted_gap = 0.0

    for event in split_schedule(filt):
        atom = filt.atom(event.atom)
        base = point(atom.id)
        kids = tuple(point(c) for c in atom.children)
        weights = tuple(filt.atom(c).measure / atom.measure for c in atom.children)
        d = split_displacement(tstar_g, event)
        pairing = split_pairing(f, tstar_g, event)

        # Exact identity: the x2 drop across the split equals d^2.
        x2_gain = sum(w * k.x2 for w, k in zip(weights, kids)) - base.x2
        scale = max(1.0, abs(base.x2), d * d)
        if abs(x2_gain - d * d) > 1e-9 * scale:
            raise CertificationError(
                f"displacement accounting failed at atom {atom.id}: "
                f"d^2={d * d:.12g} but weighted x2 gain is {x2_gain:.12g}"
            )

        diam = 0.0
        for i in range(len(kids)):
            for j in range(i + 1, len(kids)):
                diam = max(diam, float(np.linalg.norm(kids[i].x1 - kids[j].x1)))

        chain_scale = max(1.0, abs(pairing), d * diam)
        if d * diam < pairing - tol * chain_scale:
            failures.append(
                f"pairing domination failed at atom {atom.id}: "
                f"|d|*diam={d * diam:.6g} < pairing={pairing:.6g}"
            )

        slack = (
            cand.evaluate(base)
            - d * diam
            - sum(w * cand.evaluate(k) for w, k in zip(weights, kids))
        )
        slack_scale = max(1.0, abs(cand.evaluate(base)))
        if slack < -tol * slack_scale:
            failures.append(f"negative split slack at atom {atom.id}: {slack:.6g}")

        records.append(
            SplitRecord(
                atom=atom.id,
                level=atom.level,
                measure=atom.measure,
                weights=weights,
                d=d,
                diameter=diam,
                pairing=pairing,
                slack=slack,
                base=base,
                children=kids,
            )
        )
        weighted_slack += atom.measure * slack
        weighted_gap += atom.measure * (d * diam - pairing)

    leaf_pts = []
    leaf_vals = []
    leaf_weighted = 0.0
    for leaf_id in filt.leaves:
        lp = point(leaf_id)
        val = cand.evaluate(lp)
        leaf_pts.append(lp)
        leaf_vals.append(val)
        leaf_weighted += filt.atom(leaf_id).measure * val
        if val < -tol * max(1.0, abs(val)):
            failures.append(f"negative candidate value on leaf atom {leaf_id}: {val:.6g}")

    root_pt = point(filt.root.id)
    bound = cand.evaluate(root_pt)
    final_slack = bound - objective
    leaf_term = leaf_weighted / total
    reassembled = (weighted_slack + weighted_gap) / total + leaf_term
    identity_residual = abs(final_slack - reassembled)
    id_scale = max(1.0, abs(bound), abs(objective))
    if identity_residual > 1e-8 * id_scale:
        raise CertificationError(
            f"telescoping identity failed: final slack {final_slack:.12g} vs "
            f"reassembled {reassembled:.12g}"
        )

    return Certificate(
        ok=not failures,
        label=cand.label,
        p=p,
        candidate_delta=cand.delta,
        filtration_delta=filt.delta,
        objective=objective,
        root=root_pt,
        bound=bound,
        final_slack=final_slack,
        records=tuple(records),
        leaves=tuple(leaf_pts),
        leaf_values=tuple(leaf_vals),
        leaf_term=leaf_term,
        identity_residual=identity_residual,
        failures=tuple(failures),
    )


def certificate_to_dict(cert: Certificate) -> dict:
    """Full JSON-ready payload, one record per schedule step."""
    return {
        "ok": cert.ok,
        "candidate": cert.label,
        "p": cert.p,
        "candidate_delta": cert.candidate_delta,
        "filtration_delta": cert.filtration_delta,
        "objective": cert.objective,
        "bound": cert.bound,
        "final_slack": cert.final_slack,
        "identity_residual": cert.identity_residual,
        "leaf_term": cert.leaf_term,
        "failures": list(cert.failures),
        "records": [
            {
                "atom": r.atom,
                "level": r.level,
                "measure": r.measure,
                "weights": list(r.weights),
                "d": r.d,
                "diameter": r.diameter,
                "pairing": r.pairing,
                "slack": r.slack,
                "base": r.base.to_dict(),
                "children": [c.to_dict() for c in r.children],
            }
            for r in cert.records
        ],
        "leaves": [
            {"point": pt.to_dict(), "value": val}
            for pt, val in zip(cert.leaves, cert.leaf_values)
        ],
    }


def certificate_rows(cert: Certificate) -> list[dict]:
    """Flat per-split rows for the tabular summary."""
    return [
        {
            "atom": r.atom,
            "level": r.level,
            "measure": r.measure,
            "d": r.d,
            "diameter": r.diameter,
            "pairing": r.pairing,
            "slack": r.slack,
        }
        for r in cert.records
    ]

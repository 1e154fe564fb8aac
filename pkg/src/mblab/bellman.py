"""Bellman points, candidate functions, and the weighted split inequality.

A witness triple (f, g, T) and an atom J compress into a four-component
point

    x = ( <f>_J,  <g^2>_J - osc_J^2(T* g),  <|f|^p>_J,  <|g|^q>_J ),

with q the conjugate exponent of p.  These points live in the convex domain

    x2 >= 0,   |x1|^p <= x3,   x2^q <= x4^2.

A candidate function B is tested against the split inequality: whenever
points x^1..x^N and weights lambda_k >= delta (summing to one) satisfy

    sum_k lambda_k x^k - x = (0, d^2, 0, 0),

an admissible B must obey

    B(x) >= |d| * diam{x1^1..x1^N} + sum_k lambda_k B(x^k).

check = evaluate the slack of that inequality on one configuration.  The
module also implements the constructive rescaling route: a configuration
with dyadic weights a_k / 2^M is expanded into 2^M copies, sorted along the
diameter direction of the x1 cloud, halved, and recombined through a binary
midpoint tree.  The separation of the half means against the cloud diameter
is the measured constant that prices moving a candidate from the balanced
regime delta = 1/2 down to smaller regularity floors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .filtration import Filtration
from .martingale import MartFunction, average, osc2, pointwise_dot
from .transforms import MartingaleTransform

__all__ = [
    "BellmanPoint",
    "BellmanCandidate",
    "SplitConfig",
    "ExpansionNode",
    "ExpansionCertificate",
    "RescaleEstimate",
    "conjugate_exponent",
    "bellman_point",
    "in_bellman_domain",
    "shaped_candidate",
    "quadratic_candidate",
    "linear_candidate",
    "scale_candidate",
    "split_slack",
    "sample_split_configs",
    "sample_dyadic_split_configs",
    "adversarial_split_configs",
    "dyadic_expand",
    "recombine_slack",
    "estimate_rescale_constant",
    "sample_boundary_points",
    "expansion_to_json",
    "configs_to_jsonl",
    "configs_from_jsonl",
]

_DOMAIN_TOL = 1e-12
_DISPLACEMENT_TOL = 1e-10


def conjugate_exponent(p: float) -> float:
    if not (1.0 < p <= 2.0):
        raise ValueError(f"p must lie in (1, 2], got {p}")
    return p / (p - 1.0)


@dataclass(frozen=True)
class BellmanPoint:
    """Four-component moment point; ``x1`` is a vector, the rest scalars."""

    x1: np.ndarray
    x2: float
    x3: float
    x4: float
    p: float
    atom: int | None = None

    def __post_init__(self) -> None:
        v = np.atleast_1d(np.asarray(self.x1, dtype=float)).copy()
        v.flags.writeable = False
        object.__setattr__(self, "x1", v)

    @property
    def q(self) -> float:
        return conjugate_exponent(self.p)

    @property
    def dim(self) -> int:
        return self.x1.shape[0]

    def as_tuple(self) -> tuple[np.ndarray, float, float, float]:
        return (self.x1, self.x2, self.x3, self.x4)

    def to_dict(self) -> dict:
        return {
            "x1": self.x1.tolist(),
            "x2": self.x2,
            "x3": self.x3,
            "x4": self.x4,
            "p": self.p,
            "atom": self.atom,
        }

    @staticmethod
    def from_dict(rec: dict) -> "BellmanPoint":
        return BellmanPoint(
            x1=np.asarray(rec["x1"], dtype=float),
            x2=float(rec["x2"]),
            x3=float(rec["x3"]),
            x4=float(rec["x4"]),
            p=float(rec["p"]),
            atom=rec.get("atom"),
        )


def bellman_point(
    f: MartFunction,
    g: MartFunction,
    op: MartingaleTransform,
    atom_id: int,
    p: float,
    tstar_g: MartFunction | None = None,
) -> BellmanPoint:
    """Moment point of the witness (f, g, T) localized to one atom.

    ``tstar_g`` may carry a precomputed adjoint to avoid recomputation when
    walking many atoms of the same witness.
    """
    q = conjugate_exponent(p)
    filt = f.filtration
    if g.dim != 1:
        raise ValueError("g must be scalar valued")
    if tstar_g is None:
        tstar_g = op.adjoint_apply(g)
    x1 = average(f, atom_id)
    g2_mean = float(average(pointwise_dot(g, g), atom_id)[0])
    x2 = g2_mean - osc2(tstar_g, atom_id)
    if x2 < -1e-12 * max(g2_mean, 1.0):
        raise ArithmeticError(
            f"negative x2 = {x2:.3e} at atom {atom_id}; adjoint accounting is broken"
        )
    sl = filt.leaf_slice(atom_id)
    m = filt.leaf_measures()[sl]
    measure = filt.atoms[atom_id].measure
    x3 = float(m @ np.linalg.norm(f.values[sl], axis=1) ** p / measure)
    x4 = float(m @ np.abs(g.values[sl, 0]) ** q / measure)
    return BellmanPoint(x1=x1, x2=x2, x3=x3, x4=x4, p=p, atom=atom_id)


def in_bellman_domain(pt: BellmanPoint, tol: float = _DOMAIN_TOL) -> bool:
    """Membership in the closed moment domain, up to an absolute slack."""
    if pt.x2 < -tol or pt.x3 < -tol or pt.x4 < -tol:
        return False
    if float(np.dot(pt.x1, pt.x1)) ** (pt.p / 2.0) > pt.x3 + tol:
        return False
    if max(pt.x2, 0.0) ** pt.q > pt.x4**2 + tol:
        return False
    return True


# ---------------------------------------------------------------------------
# Candidates


@dataclass(frozen=True)
class BellmanCandidate:
    """Callable candidate with its claimed exponent and regularity floor.

    ``cp`` and ``h`` are populated for candidates of the separated shape
    B(x) = cp * (x3 + x4) - h(x1, x2); the duality estimator needs ``cp``.
    """

    fn: Callable[[np.ndarray, float, float, float], float]
    p: float
    delta: float
    label: str
    homogeneous: bool = False
    cp: float | None = None
    h: Callable[[np.ndarray, float], float] | None = None

    @property
    def q(self) -> float:
        return conjugate_exponent(self.p)

    def evaluate(self, pt: BellmanPoint) -> float:
        return float(self.fn(pt.x1, pt.x2, pt.x3, pt.x4))

    def evaluate_raw(self, x1: np.ndarray, x2: float, x3: float, x4: float) -> float:
        return float(self.fn(np.atleast_1d(np.asarray(x1, dtype=float)), x2, x3, x4))


def shaped_candidate(
    cp: float,
    h: Callable[[np.ndarray, float], float],
    p: float,
    delta: float,
    label: str,
    homogeneous: bool = False,
) -> BellmanCandidate:
    """Candidate of the separated shape cp * (x3 + x4) - h(x1, x2)."""

    def fn(x1: np.ndarray, x2: float, x3: float, x4: float) -> float:
        return cp * (x3 + x4) - h(x1, x2)

    return BellmanCandidate(
        fn=fn, p=p, delta=delta, label=label, homogeneous=homogeneous, cp=cp, h=h
    )


def quadratic_candidate(delta: float, p: float = 2.0, cp: float | None = None) -> BellmanCandidate:
    """Reference admissible candidate for p = 2 at regularity floor delta:

        B(x) = alpha * (x3 + x4) - alpha * (|x1|^2 + x2),  alpha = 1 / sqrt(2 delta).

    The quadratic penalty absorbs the diameter gain: for any admissible
    configuration the two diameter endpoints carry weight >= delta, so the
    x1 spread contributes at least delta * diam^2 / 2 of convexity excess,
    and together with the d^2 shift in x2 this dominates |d| * diam exactly
    when alpha * sqrt(2 delta) >= 1.  For p < 2 the same shape violates the
    boundary sign condition at large |x1|; pass an explicit cp to use it as
    a bounded-range demonstration candidate.
    """
    if not (0.0 < delta <= 0.5):
        raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
    alpha = 1.0 / math.sqrt(2.0 * delta)
    if cp is None:
        if p != 2.0:
            raise ValueError("for p != 2 an explicit cp must be supplied")
        cp = alpha

    def h(x1: np.ndarray, x2: float) -> float:
        return alpha * (float(np.dot(x1, x1)) + x2)

    return shaped_candidate(cp=cp, h=h, p=p, delta=delta, label=f"quadratic(delta={delta:g})")


def linear_candidate(cp: float, p: float, delta: float) -> BellmanCandidate:
    """cp * (x3 + x4): continuous and boundary nonnegative, but carries no
    penalty term, so every split with d != 0 and spread children defeats it."""
    return shaped_candidate(
        cp=cp, h=lambda x1, x2: 0.0, p=p, delta=delta, label=f"linear(cp={cp:g})"
    )


def scale_candidate(cand: BellmanCandidate, c: float, delta: float | None = None) -> BellmanCandidate:
    """Multiply a candidate by c >= 1, optionally retagging the claimed floor."""
    new_delta = cand.delta if delta is None else delta
    scaled_h = None
    if cand.h is not None:
        base_h = cand.h
        scaled_h = lambda x1, x2: c * base_h(x1, x2)
    base_fn = cand.fn
    return BellmanCandidate(
        fn=lambda x1, x2, x3, x4: c * base_fn(x1, x2, x3, x4),
        p=cand.p,
        delta=new_delta,
        label=f"{c:g}*{cand.label}",
        homogeneous=cand.homogeneous,
        cp=None if cand.cp is None else c * cand.cp,
        h=scaled_h,
    )


# ---------------------------------------------------------------------------
# Split configurations


@dataclass(frozen=True, eq=False)
class SplitConfig:
    """One instance of the split-inequality hypothesis.

    ``points`` are the split targets x^1..x^N, ``weights`` the lambdas
    (each >= delta, summing to one), ``d`` the displacement scale, ``base``
    the source point with base = sum_k lambda_k x^k - (0, d^2, 0, 0).
    """

    delta: float
    p: float
    points: tuple[BellmanPoint, ...]
    weights: np.ndarray
    d: float
    base: BellmanPoint

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float).copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        n = len(self.points)
        if n < 2:
            raise ValueError("a split configuration needs at least two points")
        if n != w.shape[0]:
            raise ValueError("points and weights length mismatch")
        if n > int(1.0 / self.delta + 1e-9):
            raise ValueError(f"{n} parts exceed floor(1/delta) at delta={self.delta}")
        if w.min() < self.delta - 1e-12:
            raise ValueError(f"weight {w.min():.6g} below delta={self.delta}")
        if abs(w.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        for pt in (*self.points, self.base):
            if pt.p != self.p:
                raise ValueError("exponent mismatch inside configuration")
            if not in_bellman_domain(pt, tol=1e-9 * _scale_of(pt)):
                raise ValueError(f"point outside the moment domain: {pt}")
        gap = self.displacement_residual()
        if gap > _DISPLACEMENT_TOL * max(1.0, _scale_of(self.base)):
            raise ValueError(f"displacement identity violated by {gap:.3e}")

    @property
    def n(self) -> int:
        return len(self.points)

    def displacement_residual(self) -> float:
        """Max componentwise gap in sum_k lambda_k x^k - base = (0, d^2, 0, 0)."""
        agg_x1 = sum(w * pt.x1 for w, pt in zip(self.weights, self.points))
        r1 = float(np.max(np.abs(agg_x1 - self.base.x1)))
        agg = [
            float(sum(w * getattr(pt, name) for w, pt in zip(self.weights, self.points)))
            for name in ("x2", "x3", "x4")
        ]
        r2 = abs(agg[0] - self.base.x2 - self.d**2)
        r3 = abs(agg[1] - self.base.x3)
        r4 = abs(agg[2] - self.base.x4)
        return max(r1, r2, r3, r4)

    def x1_diameter(self) -> float:
        pts = [pt.x1 for pt in self.points]
        best = 0.0
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                best = max(best, float(np.linalg.norm(pts[i] - pts[j])))
        return best

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "p": self.p,
            "weights": self.weights.tolist(),
            "d": self.d,
            "base": self.base.to_dict(),
            "points": [pt.to_dict() for pt in self.points],
        }

    @staticmethod
    def from_dict(rec: dict) -> "SplitConfig":
        return SplitConfig(
            delta=float(rec["delta"]),
            p=float(rec["p"]),
            points=tuple(BellmanPoint.from_dict(r) for r in rec["points"]),
            weights=np.asarray(rec["weights"], dtype=float),
            d=float(rec["d"]),
            base=BellmanPoint.from_dict(rec["base"]),
        )


def _scale_of(pt: BellmanPoint) -> float:
    return max(1.0, float(np.linalg.norm(pt.x1)), abs(pt.x2), abs(pt.x3), abs(pt.x4))


def split_slack(cand: BellmanCandidate, cfg: SplitConfig) -> float:
    """Signed slack of the split inequality; admissible candidates keep it
    nonnegative up to roundoff."""
    diam = cfg.x1_diameter()
    split_side = abs(cfg.d) * diam + float(
        sum(w * cand.evaluate(pt) for w, pt in zip(cfg.weights, cfg.points))
    )
    return cand.evaluate(cfg.base) - split_side


# ---------------------------------------------------------------------------
# Samplers


def _random_point(rng: np.random.Generator, dim: int, p: float, q: float) -> BellmanPoint:
    x1 = rng.normal(size=dim)
    x3 = float(np.linalg.norm(x1) ** p + 0.5 * rng.exponential())
    x2 = float(0.8 * abs(rng.normal()))
    x4 = float(x2 ** (q / 2.0) + 0.5 * rng.exponential())
    return BellmanPoint(x1=x1, x2=x2, x3=x3, x4=x4, p=p)


def _assemble_config(
    delta: float,
    p: float,
    points: Sequence[BellmanPoint],
    weights: np.ndarray,
    rng: np.random.Generator,
) -> SplitConfig:
    x2_cap = float(sum(w * pt.x2 for w, pt in zip(weights, points)))
    d = math.sqrt(rng.uniform(0.0, x2_cap)) if x2_cap > 0 else 0.0
    base = BellmanPoint(
        x1=sum(w * pt.x1 for w, pt in zip(weights, points)),
        x2=x2_cap - d**2,
        x3=float(sum(w * pt.x3 for w, pt in zip(weights, points))),
        x4=float(sum(w * pt.x4 for w, pt in zip(weights, points))),
        p=p,
    )
    # Convexity of the domain makes the base admissible automatically, but the
    # contract says reject, so keep an explicit guard.
    if not in_bellman_domain(base, tol=1e-9 * _scale_of(base)):
        raise ValueError("sampled base point left the moment domain")
    return SplitConfig(delta=delta, p=p, points=tuple(points), weights=weights, d=d, base=base)


def sample_split_configs(
    delta: float,
    p: float,
    count: int,
    seed: int,
    dim: int = 1,
) -> list[SplitConfig]:
    """Seeded admissible configurations with Dirichlet-spread weights."""
    if not (1 <= dim <= 4):
        raise ValueError(f"dim must lie in [1, 4], got {dim}")
    q = conjugate_exponent(p)
    n_max = int(1.0 / delta + 1e-9)
    if n_max < 2:
        raise ValueError(f"delta={delta} admits no configuration with >= 2 parts")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, n_max + 1))
        weights = delta + (1.0 - n * delta) * rng.dirichlet(np.ones(n))
        points = [_random_point(rng, dim, p, q) for _ in range(n)]
        out.append(_assemble_config(delta, p, points, weights, rng))
    return out


def sample_dyadic_split_configs(
    delta: float,
    p: float,
    count: int,
    seed: int,
    dim: int = 1,
    m: int = 6,
) -> list[SplitConfig]:
    """Configurations whose weights are a_k / 2^m with every a_k >= delta * 2^m."""
    if not (1 <= m <= 16):
        raise ValueError(f"m must lie in [1, 16], got {m}")
    if not (1 <= dim <= 4):
        raise ValueError(f"dim must lie in [1, 4], got {dim}")
    q = conjugate_exponent(p)
    b = 2**m
    a_min = max(1, math.ceil(delta * b - 1e-9))
    n_cap = min(int(1.0 / delta + 1e-9), b // a_min)
    if n_cap < 2:
        raise ValueError(f"no dyadic split with 2 parts at delta={delta}, m={m}")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, n_cap + 1))
        counts = np.full(n, a_min, dtype=int)
        rest = b - n * a_min
        if rest > 0:
            counts += rng.multinomial(rest, np.full(n, 1.0 / n))
        weights = counts / b
        points = [_random_point(rng, dim, p, q) for _ in range(n)]
        out.append(_assemble_config(delta, p, points, weights, rng))
    return out


def adversarial_split_configs(
    delta: float,
    p: float,
    dim: int = 1,
    scales: Sequence[float] = (0.5, 1.0, 2.0),
    d_grid: Sequence[float] | None = None,
) -> list[SplitConfig]:
    """Extremal-geometry configurations that pin the worst case of
    quadratic-penalty candidates.

    For delta <= 1/3: two weight-delta points at the ends of a diameter and
    the rest of the mass at the mean, which minimizes the x1 spread at fixed
    diameter.  Above 1/3 only two parts fit, with the lighter one at the
    floor.  Crossed with a grid of displacement-to-diameter ratios; random
    sampling alone stays far from this corner.
    """
    q = conjugate_exponent(p)
    if d_grid is None:
        d_grid = tuple(0.025 * (k + 1) for k in range(28))  # 0.025 .. 0.7
    out = []
    for scale in scales:
        if delta <= 1.0 / 3.0 + 1e-12:
            xs = (0.0, scale, scale / 2.0)
            ws = (delta, delta, 1.0 - 2.0 * delta)
        else:
            xs = (0.0, scale)
            ws = (delta, 1.0 - delta)
        for t in d_grid:
            d = t * scale
            pts = []
            for x in xs:
                x1 = np.zeros(dim)
                x1[0] = x
                pts.append(
                    BellmanPoint(
                        x1=x1,
                        x2=d * d,
                        x3=float(abs(x) ** p),
                        x4=float((d * d) ** (q / 2.0)),
                        p=p,
                    )
                )
            weights = np.asarray(ws, dtype=float)
            base = BellmanPoint(
                x1=sum(w * pt.x1 for w, pt in zip(weights, pts)),
                x2=0.0,
                x3=float(sum(w * pt.x3 for w, pt in zip(weights, pts))),
                x4=float(sum(w * pt.x4 for w, pt in zip(weights, pts))),
                p=p,
            )
            out.append(
                SplitConfig(
                    delta=delta, p=p, points=tuple(pts), weights=weights, d=d, base=base
                )
            )
    return out


def sample_boundary_points(
    p: float, count: int, seed: int, dim: int = 1
) -> list[BellmanPoint]:
    """Points sitting exactly on the face |x1|^p = x3."""
    q = conjugate_exponent(p)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        x1 = rng.normal(size=dim)
        x2 = float(abs(rng.normal()))
        margin = 0.0 if rng.random() < 0.25 else float(0.5 * rng.exponential())
        out.append(
            BellmanPoint(
                x1=x1,
                x2=x2,
                x3=float(np.linalg.norm(x1) ** p),
                x4=float(x2 ** (q / 2.0) + margin),
                p=p,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Dyadic expansion


@dataclass(frozen=True)
class ExpansionNode:
    """Binary midpoint tree node: uniform mean of a contiguous copy block."""

    x1: np.ndarray
    x2: float
    x3: float
    x4: float
    weight: float
    children: tuple["ExpansionNode", ...]

    def to_dict(self) -> dict:
        return {
            "point": {"x1": np.atleast_1d(self.x1).tolist(), "x2": self.x2, "x3": self.x3, "x4": self.x4},
            "weight": self.weight,
            "children": [c.to_dict() for c in self.children],
        }


@dataclass(frozen=True, eq=False)
class ExpansionCertificate:
    """Outcome of the copy-sort-halve expansion of a dyadic configuration."""

    m: int
    copies: int
    order: tuple[int, ...]  # sorted copy order, entries = original point index
    half_weights: tuple[float, float]
    half_means: tuple[ExpansionNode, ExpansionNode]
    separation: float
    diameter: float
    ratio: float | None
    degenerate: bool
    tree: ExpansionNode


def _weights_to_counts(weights: np.ndarray, m: int | None) -> tuple[np.ndarray, int]:
    if m is not None:
        candidates = [m]
    else:
        candidates = range(1, 17)
    for mm in candidates:
        b = 2**mm
        counts = np.rint(weights * b).astype(int)
        if np.all(np.abs(counts - weights * b) <= 1e-6) and counts.sum() == b and counts.min() >= 1:
            return counts, mm
    raise ValueError("weights are not dyadic rationals with denominator up to 2^16")


def dyadic_expand(cfg: SplitConfig, m: int | None = None) -> ExpansionCertificate:
    """Expand, sort along the diameter direction, halve, and build the tree.

    Sort keys are scalar projections of the x1 copies onto the segment
    between a fixed diameter-realizing pair; ties keep original copy order.
    """
    counts, mm = _weights_to_counts(cfg.weights, m)
    b = int(counts.sum())
    copy_owner = np.repeat(np.arange(cfg.n), counts)

    pts_x1 = np.stack([pt.x1 for pt in cfg.points])
    diam = cfg.x1_diameter()
    degenerate = diam <= 0.0

    if degenerate:
        order = np.arange(b)
    else:
        best = (0, 0)
        best_d = -1.0
        for i in range(cfg.n):
            for j in range(i + 1, cfg.n):
                dij = float(np.linalg.norm(pts_x1[i] - pts_x1[j]))
                if dij > best_d:
                    best_d, best = dij, (i, j)
        y1, y2 = pts_x1[best[0]], pts_x1[best[1]]
        u = (y2 - y1) / best_d
        keys = (pts_x1[copy_owner] - y1[None, :]) @ u
        order = np.argsort(keys, kind="stable")

    sorted_owner = copy_owner[order]
    full = np.column_stack(
        [
            pts_x1[sorted_owner],
            [cfg.points[k].x2 for k in sorted_owner],
            [cfg.points[k].x3 for k in sorted_owner],
            [cfg.points[k].x4 for k in sorted_owner],
        ]
    )
    dim = pts_x1.shape[1]

    def build(lo: int, hi: int) -> ExpansionNode:
        block = full[lo:hi]
        mean = block.mean(axis=0)
        node_kids: tuple[ExpansionNode, ...] = ()
        if hi - lo > 1:
            mid = (lo + hi) // 2
            node_kids = (build(lo, mid), build(mid, hi))
        return ExpansionNode(
            x1=mean[:dim],
            x2=float(mean[dim]),
            x3=float(mean[dim + 1]),
            x4=float(mean[dim + 2]),
            weight=(hi - lo) / b,
            children=node_kids,
        )

    tree = build(0, b)
    left, right = tree.children if tree.children else (tree, tree)
    separation = float(np.linalg.norm(left.x1 - right.x1))
    ratio = None if degenerate else separation / diam
    return ExpansionCertificate(
        m=mm,
        copies=b,
        order=tuple(int(k) for k in sorted_owner),
        half_weights=(left.weight, right.weight),
        half_means=(left, right),
        separation=separation,
        diameter=diam,
        ratio=ratio,
        degenerate=degenerate,
        tree=tree,
    )


def recombine_slack(
    cand: BellmanCandidate, cfg: SplitConfig, cert: ExpansionCertificate
) -> tuple[float, float]:
    """Rebuild the direct slack out of the expansion tree.

    One application of the two-point split inequality at the top (with the
    full displacement d and the measured separation) plus weighted midpoint
    steps at every lower internal node reproduces the direct slack exactly,
    shifted by |d| * (separation - diameter):

        direct = top + sum_nodes weight * midpoint_slack
                     + |d| * (separation - diameter).

    Returns (direct, recombined); the two must agree to roundoff for any
    candidate, admissible or not.
    """
    direct = split_slack(cand, cfg)

    def b_of(node: ExpansionNode) -> float:
        return cand.evaluate_raw(node.x1, node.x2, node.x3, node.x4)

    left, right = cert.half_means
    top = cand.evaluate(cfg.base) - abs(cfg.d) * cert.separation - 0.5 * (b_of(left) + b_of(right))

    def midpoint_sum(node: ExpansionNode) -> float:
        if not node.children:
            return 0.0
        c1, c2 = node.children
        own = node.weight * (b_of(node) - 0.5 * (b_of(c1) + b_of(c2)))
        return own + midpoint_sum(c1) + midpoint_sum(c2)

    mids = midpoint_sum(left) + midpoint_sum(right)
    recombined = top + mids + abs(cfg.d) * (cert.separation - cert.diameter)
    return direct, recombined


# ---------------------------------------------------------------------------
# Rescale estimation


@dataclass(frozen=True)
class RescaleEstimate:
    constant: float
    delta: float
    p: float
    samples: int
    adversarial: int
    seed: int
    grid: tuple[tuple[float, int], ...]  # (tested constant, failing configs)


def estimate_rescale_constant(
    cand: BellmanCandidate,
    delta: float,
    samples: int = 200,
    seed: int = 0,
    dim: int = 1,
    grid_factor: float = 1.05,
    c_max: float = 1e6,
    adversarial: bool = True,
) -> RescaleEstimate:
    """Smallest grid constant C with C * candidate passing every sampled
    configuration at the target floor.  The grid starts at 1 and grows
    geometrically; a candidate already admissible at delta reports 1.0.
    Extremal-geometry configurations are mixed in by default because random
    draws alone understate the required constant."""
    cfgs = sample_split_configs(delta, cand.p, samples, seed, dim=dim)
    adv = adversarial_split_configs(delta, cand.p, dim=dim) if adversarial else []
    cfgs = cfgs + adv
    grid: list[tuple[float, int]] = []
    c = 1.0
    while c <= c_max:
        scaled = scale_candidate(cand, c, delta=delta)
        failures = 0
        worst = (0.0, -1)
        for k, cfg in enumerate(cfgs):
            tol = 1e-9 * max(1.0, abs(scaled.evaluate(cfg.base)))
            slack = split_slack(scaled, cfg)
            if slack < -tol:
                failures += 1
                if slack < worst[0]:
                    worst = (slack, k)
        grid.append((c, failures))
        if failures == 0:
            return RescaleEstimate(
                constant=c,
                delta=delta,
                p=cand.p,
                samples=samples,
                adversarial=len(adv),
                seed=seed,
                grid=tuple(grid),
            )
        c *= grid_factor
    raise RuntimeError(
        f"no rescale constant up to {c_max:g} makes '{cand.label}' pass at "
        f"delta={delta}; at C={grid[-1][0]:.6g} {grid[-1][1]} of {len(cfgs)} "
        f"configurations still fail, worst slack {worst[0]:.6g} at config {worst[1]}"
    )


# ---------------------------------------------------------------------------
# Serialization


def expansion_to_json(cert: ExpansionCertificate) -> str:
    payload = {
        "m": cert.m,
        "copies": cert.copies,
        "order": list(cert.order),
        "separation": cert.separation,
        "diameter": cert.diameter,
        "ratio": cert.ratio,
        "degenerate": cert.degenerate,
        "tree": cert.tree.to_dict(),
    }
    return json.dumps(payload)


def configs_to_jsonl(cfgs: Sequence[SplitConfig]) -> str:
    return "\n".join(json.dumps(cfg.to_dict()) for cfg in cfgs) + "\n"


def configs_from_jsonl(text: str) -> list[SplitConfig]:
    return [
        SplitConfig.from_dict(json.loads(line))
        for line in text.splitlines()
        if line.strip()
    ]

"""Finite filtrations of the unit interval by nested atom partitions.

A filtration here is a finite tower of partitions A_0, A_1, ..., A_N of a
half-open interval I = [a, b).  A_0 = {I}.  Walking from level n to n+1,
each atom either splits into k >= 2 children that partition it exactly, or
survives unchanged into every later level.  The regularity floor delta
bounds every child/parent measure ratio from below:

    |child| / |parent| >= delta,   with delta in (0, 1/2].

Atoms that split form the active set D; they are consumed one at a time by
a deterministic split schedule (ascending level, then ascending left
endpoint) that refines {I} step by step into the leaf partition A_N.  The
one-split-at-a-time refiltration is what downstream difference operators
are indexed by.

Two builders are provided: the uniform binary (dyadic) filtration, and a
seeded random generator with prescribed regularity floor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

__all__ = [
    "Atom",
    "Filtration",
    "SplitEvent",
    "FiltrationError",
    "RatioSamplingError",
    "build_dyadic",
    "build_random_regular",
    "regularity_delta",
    "split_schedule",
    "level_partition",
    "filtration_to_json",
    "filtration_from_json",
]

# Exactness floor for partition bookkeeping (endpoint chaining, measure sums).
_GEOM_TOL = 1e-12


class FiltrationError(ValueError):
    """Invalid filtration parameters or inconsistent atom data."""


class RatioSamplingError(RuntimeError):
    """Rejection sampling of split ratios exhausted its budget.

    Raised when delta is so close to 1/k that the feasible ratio region has
    vanishing volume.
    """


@dataclass(frozen=True, eq=False)
class Atom:
    """Half-open interval [a, b) sitting at one level of the tower.

    ``level`` is the level at which the atom first appears.  An atom with
    children is split immediately at its own level (children live at
    level + 1); an atom without children survives into every later level.
    """

    id: int
    a: float
    b: float
    level: int
    parent: int | None
    children: tuple[int, ...]

    @property
    def measure(self) -> float:
        return self.b - self.a

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True, eq=False)
class SplitEvent:
    """One step of the refiltration: atom ``atom`` is replaced by its children.

    ``prev_partition`` and ``post_partition`` are full partitions of I (atom
    ids, left-endpoint order); they differ only at ``atom``.
    """

    atom: int
    order_index: int
    prev_partition: tuple[int, ...]
    post_partition: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Filtration:
    """Immutable atom tower.  Hash/eq are by object identity on purpose:
    derived structures (schedules, averaging matrices) are cached per object.
    """

    delta: float
    depth: int
    atoms: tuple[Atom, ...]
    # Derived fields, filled in __post_init__.
    levels: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    leaves: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        _validate_atoms(self)
        levels = tuple(
            tuple(a.id for a in sorted(self._atoms_of_level(n), key=lambda a: a.a))
            for n in range(self.depth + 1)
        )
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "leaves", levels[self.depth])
        _validate_levels(self)

    def _atoms_of_level(self, n: int) -> list[Atom]:
        # A_n: atoms created at level n, plus earlier atoms that never split.
        out = []
        for a in self.atoms:
            if a.level == n or (a.is_leaf and a.level < n):
                out.append(a)
        return out

    @property
    def root(self) -> Atom:
        return self.atoms[self.levels[0][0]]

    @property
    def interval(self) -> tuple[float, float]:
        r = self.root
        return (r.a, r.b)

    @property
    def total_measure(self) -> float:
        r = self.root
        return r.b - r.a

    def atom(self, atom_id: int) -> Atom:
        return self.atoms[atom_id]

    @property
    def active_set(self) -> tuple[int, ...]:
        """Ids of the atoms that split, in schedule order."""
        return tuple(e.atom for e in split_schedule(self))

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def leaf_index(self, atom_id: int) -> int:
        return _leaf_positions(self)[atom_id]

    def leaf_measures(self) -> np.ndarray:
        return _leaf_measures(self)

    def leaf_slice(self, atom_id: int) -> slice:
        """Contiguous range of leaf positions covered by the atom."""
        lo, hi = _leaf_spans(self)[atom_id]
        return slice(lo, hi)


def _validate_atoms(f: Filtration) -> None:
    if not (0.0 < f.delta <= 0.5):
        raise FiltrationError(f"delta must lie in (0, 1/2], got {f.delta}")
    if f.depth < 1:
        raise FiltrationError(f"depth must be >= 1, got {f.depth}")
    if not f.atoms:
        raise FiltrationError("empty atom list")
    for i, a in enumerate(f.atoms):
        if a.id != i:
            raise FiltrationError("atom ids must be dense 0..len-1 in order")
        if not (a.b > a.a):
            raise FiltrationError(f"atom {a.id} has nonpositive measure")
        if len(a.children) == 1:
            raise FiltrationError(f"atom {a.id} has exactly one child")
        if a.children:
            if a.level >= f.depth:
                raise FiltrationError(f"atom {a.id} splits past the final level")
            kids = [f.atoms[c] for c in a.children]
            for k in kids:
                if k.parent != a.id or k.level != a.level + 1:
                    raise FiltrationError(f"child bookkeeping broken at atom {a.id}")
            kids_sorted = sorted(kids, key=lambda k: k.a)
            scale = max(a.measure, 1.0)
            if abs(kids_sorted[0].a - a.a) > _GEOM_TOL * scale or abs(
                kids_sorted[-1].b - a.b
            ) > _GEOM_TOL * scale:
                raise FiltrationError(f"children do not span atom {a.id}")
            for u, v in zip(kids_sorted, kids_sorted[1:]):
                if abs(u.b - v.a) > _GEOM_TOL * scale:
                    raise FiltrationError(f"children leave a gap inside atom {a.id}")
            if abs(sum(k.measure for k in kids) - a.measure) > _GEOM_TOL * scale:
                raise FiltrationError(f"child measures do not sum inside atom {a.id}")
            for k in kids:
                if k.measure / a.measure < f.delta - _GEOM_TOL:
                    raise FiltrationError(
                        f"child ratio {k.measure / a.measure:.3e} below delta at atom {a.id}"
                    )


def _validate_levels(f: Filtration) -> None:
    roots = [a for a in f.atoms if a.parent is None]
    if len(roots) != 1 or roots[0].level != 0:
        raise FiltrationError("need exactly one root atom at level 0")
    for n in range(f.depth):
        # Strictly increasing tower: some atom of A_n must split at time n.
        if not any(f.atoms[i].children and f.atoms[i].level == n for i in f.levels[n]):
            raise FiltrationError(f"no split at level {n}; tower not strictly increasing")


# ---------------------------------------------------------------------------
# Builders


def build_dyadic(depth: int) -> Filtration:
    """Uniform binary filtration of [0, 1).  Every atom above the final level
    splits in half; endpoints are exact binary fractions."""
    if not (1 <= depth <= 20):
        raise FiltrationError(f"dyadic depth must be in [1, 20], got {depth}")
    atoms: list[Atom] = []

    def rec(a: float, b: float, level: int, parent: int | None) -> int:
        my_id = len(atoms)
        atoms.append(None)  # placeholder, patched below
        if level < depth:
            mid = (a + b) / 2.0
            left = rec(a, mid, level + 1, my_id)
            right = rec(mid, b, level + 1, my_id)
            atoms[my_id] = Atom(my_id, a, b, level, parent, (left, right))
        else:
            atoms[my_id] = Atom(my_id, a, b, level, parent, ())
        return my_id

    rec(0.0, 1.0, 0, None)
    return Filtration(delta=0.5, depth=depth, atoms=tuple(atoms))


def build_random_regular(
    depth: int,
    delta: float,
    max_children: int,
    split_prob: float,
    seed: int,
    ratio_budget: int = 10_000,
) -> Filtration:
    """Seeded random filtration of [0, 1) with child ratios >= delta.

    At each level, every atom created at that level splits with probability
    split_prob into k ~ U{2..max_children} children; if no atom volunteers,
    one is forced so the tower keeps growing.  Ratios are drawn uniformly on
    the simplex and rejected until all are >= delta; the exactly-critical
    case k * delta == 1 degenerates to the unique equal split.
    """
    if not (1 <= depth <= 12):
        raise FiltrationError(f"random depth must be in [1, 12], got {depth}")
    if not (0.0 < delta <= 0.5):
        raise FiltrationError(f"delta must lie in (0, 1/2], got {delta}")
    if max_children < 2:
        raise FiltrationError(f"max_children must be >= 2, got {max_children}")
    if max_children * delta > 1.0 + 1e-12:
        raise FiltrationError(
            f"infeasible: max_children * delta = {max_children * delta:.6g} > 1"
        )
    if not (0.0 <= split_prob <= 1.0):
        raise FiltrationError(f"split_prob must lie in [0, 1], got {split_prob}")

    rng = np.random.default_rng(seed)
    atoms: list[Atom] = [Atom(0, 0.0, 1.0, 0, None, ())]

    current = [0]  # atoms created at the current level, candidates to split
    for level in range(depth):
        coins = rng.random(len(current))
        chosen = [i for i, c in zip(current, coins) if c < split_prob]
        if not chosen:
            chosen = [current[int(rng.integers(len(current)))]]
        nxt: list[int] = []
        for i in sorted(chosen, key=lambda j: atoms[j].a):
            parent = atoms[i]
            k = int(rng.integers(2, max_children + 1))
            ratios = _sample_ratios(rng, k, delta, ratio_budget)
            cuts = parent.a + parent.measure * np.cumsum(ratios)[:-1]
            edges = [parent.a, *cuts.tolist(), parent.b]
            child_ids = []
            for j in range(k):
                cid = len(atoms)
                atoms.append(Atom(cid, edges[j], edges[j + 1], level + 1, parent.id, ()))
                child_ids.append(cid)
            atoms[i] = Atom(parent.id, parent.a, parent.b, parent.level, parent.parent, tuple(child_ids))
            nxt.extend(child_ids)
        current = nxt
    return Filtration(delta=delta, depth=depth, atoms=tuple(atoms))


def _sample_ratios(rng: np.random.Generator, k: int, delta: float, budget: int) -> np.ndarray:
    if 1.0 - k * delta < 1e-9:
        # Unique feasible point: the equal split.
        return np.full(k, 1.0 / k)
    for _ in range(budget):
        w = rng.dirichlet(np.ones(k))
        if w.min() >= delta:
            return w
    raise RatioSamplingError(
        f"no ratio draw with min >= {delta} in {budget} tries (k={k}); "
        "delta is too close to 1/k"
    )


# ---------------------------------------------------------------------------
# Derived structure


def regularity_delta(f: Filtration) -> float:
    """Smallest realized child/parent measure ratio."""
    best = 0.5
    for a in f.atoms:
        if a.children:
            for c in a.children:
                best = min(best, f.atoms[c].measure / a.measure)
    return best


@lru_cache(maxsize=64)
def split_schedule(f: Filtration) -> tuple[SplitEvent, ...]:
    """Deterministic one-split-at-a-time refinement from {I} to the leaves.

    Events are ordered by (level of the split atom, left endpoint).  Each
    event's post partition is the next event's prev partition.
    """
    split_atoms = sorted(
        (a for a in f.atoms if a.children), key=lambda a: (a.level, a.a)
    )
    events = []
    partition: list[int] = [f.root.id]
    for idx, a in enumerate(split_atoms):
        prev = tuple(partition)
        pos = partition.index(a.id)
        partition[pos : pos + 1] = list(a.children)
        partition.sort(key=lambda i: f.atoms[i].a)
        events.append(SplitEvent(a.id, idx, prev, tuple(partition)))
    return tuple(events)


def level_partition(f: Filtration, n: int) -> tuple[int, ...]:
    if not (0 <= n <= f.depth):
        raise FiltrationError(f"level {n} outside [0, {f.depth}]")
    return f.levels[n]


@lru_cache(maxsize=64)
def _leaf_positions(f: Filtration) -> dict[int, int]:
    return {atom_id: i for i, atom_id in enumerate(f.leaves)}


@lru_cache(maxsize=64)
def _leaf_measures(f: Filtration) -> np.ndarray:
    m = np.array([f.atoms[i].measure for i in f.leaves])
    m.flags.writeable = False
    return m


@lru_cache(maxsize=64)
def _leaf_spans(f: Filtration) -> dict[int, tuple[int, int]]:
    """Every atom covers a contiguous run of leaves; record [lo, hi) spans."""
    pos = _leaf_positions(f)
    spans: dict[int, tuple[int, int]] = {}

    def rec(atom_id: int) -> tuple[int, int]:
        a = f.atoms[atom_id]
        if not a.children:
            i = pos[atom_id]
            spans[atom_id] = (i, i + 1)
        else:
            lo = min(rec(c)[0] for c in a.children)
            hi = max(rec(c)[1] for c in a.children)
            spans[atom_id] = (lo, hi)
        return spans[atom_id]

    rec(f.root.id)
    return spans


# ---------------------------------------------------------------------------
# Serialization


def filtration_to_json(f: Filtration) -> str:
    payload = {
        "delta": f.delta,
        "depth": f.depth,
        "atoms": [
            {
                "id": a.id,
                "a": a.a,
                "b": a.b,
                "level": a.level,
                "parent": a.parent,
                "children": list(a.children),
            }
            for a in f.atoms
        ],
    }
    return json.dumps(payload)


def filtration_from_json(text: str) -> Filtration:
    payload = json.loads(text)
    atoms = tuple(
        Atom(
            id=rec["id"],
            a=float(rec["a"]),
            b=float(rec["b"]),
            level=int(rec["level"]),
            parent=rec["parent"],
            children=tuple(rec["children"]),
        )
        for rec in sorted(payload["atoms"], key=lambda r: r["id"])
    )
    return Filtration(delta=float(payload["delta"]), depth=int(payload["depth"]), atoms=atoms)

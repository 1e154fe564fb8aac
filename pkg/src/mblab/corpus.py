"""Seeded witness corpus: filtrations, martingales, and transforms.

The default grid crosses regularity floors {0.1, 0.25, 1/3, 0.5} with
target dimensions {1, 2, 3} and a hundred seeds each; depth cycles through
2..5 with the seed.  Child counts are capped per floor so that ratio
sampling keeps honest slack above the floor (at the balanced floor 1/2 the
grid falls back to exact dyadic towers, where random ratios have no room).
Every object here is a pure function of its cell, so the corpus can be
rebuilt identically anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .filtration import (
    Filtration,
    build_dyadic,
    build_random_regular,
    level_partition,
    split_schedule,
)
from .martingale import MartFunction, delta_split
from .transforms import MartingaleTransform, make_transform

__all__ = [
    "CorpusCell",
    "PreparedCell",
    "DELTAS",
    "DIMS",
    "default_corpus",
    "max_children_for",
    "cell_filtration",
    "prepare_cell",
    "random_witness",
    "random_function",
    "random_transform",
    "haar_witness",
    "active_split_function",
]

DELTAS: tuple[float, ...] = (0.1, 0.25, 1.0 / 3.0, 0.5)
DIMS: tuple[int, ...] = (1, 2, 3)
_SEEDS_PER_CELL = 100

# Max child counts chosen so max_children * delta stays clearly below 1 and
# the Dirichlet rejection sampler converges fast.
_MAX_CHILDREN = {0.1: 4, 0.25: 3, 1.0 / 3.0: 2, 0.5: 2}


def max_children_for(delta: float) -> int:
    """Child-count cap keeping ratio sampling comfortably feasible."""
    if delta in _MAX_CHILDREN:
        return _MAX_CHILDREN[delta]
    return max(2, min(4, int(1.0 / delta + 1e-9)))


@dataclass(frozen=True)
class CorpusCell:
    delta: float
    dim: int
    seed: int

    @property
    def depth(self) -> int:
        return 2 + self.seed % 4

    @property
    def max_children(self) -> int:
        return _MAX_CHILDREN[self.delta]


@dataclass(frozen=True, eq=False)
class PreparedCell:
    cell: CorpusCell
    filtration: Filtration
    f: MartFunction
    g: MartFunction
    op: MartingaleTransform


def default_corpus(seeds: int = _SEEDS_PER_CELL) -> list[CorpusCell]:
    return [
        CorpusCell(delta=d, dim=dim, seed=s)
        for d in DELTAS
        for dim in DIMS
        for s in range(seeds)
    ]


def _cell_rng(cell: CorpusCell) -> np.random.Generator:
    di = DELTAS.index(cell.delta)
    return np.random.default_rng(
        np.random.SeedSequence(entropy=986531, spawn_key=(di, cell.dim, cell.seed))
    )


@lru_cache(maxsize=None)
def cell_filtration(delta: float, seed: int, depth: int, max_children: int) -> Filtration:
    # Balanced floor: random ratio sampling degenerates, use the exact tower.
    if delta == 0.5:
        return build_dyadic(depth)
    return build_random_regular(
        depth=depth,
        delta=delta,
        max_children=max_children,
        split_prob=0.7,
        seed=seed,
    )


def random_function(
    filt: Filtration, dim: int, rng: np.random.Generator
) -> MartFunction:
    return MartFunction(filt, rng.normal(size=(filt.n_leaves, dim)))


def random_witness(
    filt: Filtration, dim: int, rng: np.random.Generator
) -> tuple[MartFunction, MartFunction]:
    """Gaussian leaf-valued pair (f vector valued, g scalar)."""
    return random_function(filt, dim, rng), random_function(filt, 1, rng)


def random_transform(
    filt: Filtration,
    dim: int,
    rng: np.random.Generator,
    unit: bool = False,
) -> MartingaleTransform:
    """Random predictable multiplier sequence inside the closed unit ball of
    the value space; ``unit`` pins every multiplier to the unit sphere."""
    mults = []
    for n in range(1, filt.depth + 1):
        part = level_partition(filt, n - 1)
        raw = rng.normal(size=(len(part), dim))
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        rows = raw / norms
        if not unit:
            radii = rng.uniform(size=(len(part), 1)) ** (1.0 / dim)
            rows = rows * radii
        mults.append(rows)
    return make_transform(filt, mults, dim=dim)


def haar_witness(
    filt: Filtration, dim: int
) -> tuple[MartFunction, MartFunction, MartingaleTransform]:
    """Structured witness saturating the balanced pairing.

    Requires a two-child root split.  f oscillates along the first
    coordinate with the unique zero-mean unit-variance profile for the root
    weights, g carries the same scalar profile, and the transform points
    every multiplier at the first coordinate.  The pairing of g with Tf is
    then exactly one while both second moments are one.
    """
    root = filt.root
    if len(root.children) != 2:
        raise ValueError("the structured witness needs a two-child root split")
    c1, c2 = (filt.atom(c) for c in root.children)
    w1 = c1.measure / root.measure
    w2 = c2.measure / root.measure
    hi = np.sqrt(w2 / w1)
    lo = -np.sqrt(w1 / w2)
    profile = np.empty(filt.n_leaves)
    profile[filt.leaf_slice(c1.id)] = hi
    profile[filt.leaf_slice(c2.id)] = lo
    fvals = np.zeros((filt.n_leaves, dim))
    fvals[:, 0] = profile
    f = MartFunction(filt, fvals)
    g = MartFunction(filt, profile)
    mults = []
    for n in range(1, filt.depth + 1):
        rows = np.zeros((len(level_partition(filt, n - 1)), dim))
        rows[:, 0] = 1.0
        mults.append(rows)
    op = make_transform(filt, mults, dim=dim)
    return f, g, op


def active_split_function(
    filt: Filtration, dim: int, rng: np.random.Generator
) -> tuple[MartFunction, frozenset[int]]:
    """Function assembled as a sum of single-split differences over a random
    subset of the schedule, with the subset returned for support checks."""
    events = split_schedule(filt)
    keep = [ev for ev in events if rng.random() < 0.5]
    if not keep:
        keep = [events[int(rng.integers(len(events)))]]
    f = MartFunction(filt, np.zeros((filt.n_leaves, dim)))
    for ev in keep:
        piece = delta_split(random_function(filt, dim, rng), ev)
        f = f + piece
    return f, frozenset(ev.atom for ev in keep)


def prepare_cell(cell: CorpusCell) -> PreparedCell:
    """Filtration plus one random witness triple, all determined by the cell."""
    filt = cell_filtration(cell.delta, cell.seed, cell.depth, cell.max_children)
    rng = _cell_rng(cell)
    f, g = random_witness(filt, cell.dim, rng)
    op = random_transform(filt, cell.dim, rng)
    return PreparedCell(cell=cell, filtration=filt, f=f, g=g, op=op)

"""Vector-valued step functions on a filtration and their conditional calculus.

A ``MartFunction`` assigns a fixed-dimension real vector to every leaf atom,
i.e. it is an element of L^2(I, R^d) that is constant on leaves.  All inner
products and norms are measure weighted:

    (f, g) = sum_leaves |leaf| * <f(leaf), g(leaf)>,
    ||f||_p = (sum_leaves |leaf| * |f(leaf)|^p)^(1/p).

The two workhorses are the conditional expectation onto a coarser partition
and the single-split difference attached to one schedule event J:

    delta_split(f, J) = E[f | after splitting J] - E[f | before],

which is supported on J, has zero mean over J, and is an orthogonal
projection of the function space.  Scalar functions are simply d = 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .filtration import Filtration, SplitEvent, _GEOM_TOL

__all__ = [
    "MartFunction",
    "PartitionError",
    "from_leaf_values",
    "constant_function",
    "indicator",
    "cond_exp",
    "delta_split",
    "average",
    "osc2",
    "lp_norm",
    "l2_norm",
    "inner",
    "pointwise_dot",
    "pointwise_scale",
    "restrict",
    "function_to_json",
    "function_from_json",
]


class PartitionError(ValueError):
    """Atom ids do not form a partition of the base interval."""


@dataclass(frozen=True, eq=False)
class MartFunction:
    """Leaf-constant function; ``values`` has shape (n_leaves, dim)."""

    filtration: Filtration
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.filtration.n_leaves:
            raise ValueError(
                f"values must have shape (n_leaves={self.filtration.n_leaves}, dim), got {v.shape}"
            )
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def leaf_value(self, atom_id: int) -> np.ndarray:
        return self.values[self.filtration.leaf_index(atom_id)]

    def __add__(self, other: "MartFunction") -> "MartFunction":
        _check_same_space(self, other)
        return MartFunction(self.filtration, self.values + other.values)

    def __sub__(self, other: "MartFunction") -> "MartFunction":
        _check_same_space(self, other)
        return MartFunction(self.filtration, self.values - other.values)

    def __neg__(self) -> "MartFunction":
        return MartFunction(self.filtration, -self.values)

    def __mul__(self, c: float) -> "MartFunction":
        return MartFunction(self.filtration, self.values * float(c))

    __rmul__ = __mul__

    def shift(self, vec: np.ndarray) -> "MartFunction":
        """Subtract-free helper: f + constant vector."""
        v = np.broadcast_to(np.atleast_1d(np.asarray(vec, dtype=float)), (self.dim,))
        return MartFunction(self.filtration, self.values + v[None, :])


def _check_same_space(f: MartFunction, g: MartFunction) -> None:
    if f.filtration is not g.filtration:
        raise ValueError("functions live on different filtration objects")
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")


def from_leaf_values(f: Filtration, leaf_map: dict[int, Sequence[float]] | np.ndarray) -> MartFunction:
    """Build from either an array in leaf order or a map {leaf atom id: vector}."""
    if isinstance(leaf_map, dict):
        dims = {len(np.atleast_1d(v)) for v in leaf_map.values()}
        if len(dims) != 1:
            raise ValueError("inconsistent vector dimensions in leaf map")
        d = dims.pop()
        vals = np.zeros((f.n_leaves, d))
        seen = set()
        for atom_id, vec in leaf_map.items():
            vals[f.leaf_index(atom_id)] = np.atleast_1d(vec)
            seen.add(atom_id)
        if seen != set(f.leaves):
            raise ValueError("leaf map must cover every leaf exactly once")
        return MartFunction(f, vals)
    return MartFunction(f, np.asarray(leaf_map, dtype=float))


def constant_function(f: Filtration, vec: Sequence[float] | float) -> MartFunction:
    v = np.atleast_1d(np.asarray(vec, dtype=float))
    return MartFunction(f, np.tile(v, (f.n_leaves, 1)))


def indicator(f: Filtration, atom_id: int) -> MartFunction:
    """Scalar indicator of one atom."""
    vals = np.zeros((f.n_leaves, 1))
    vals[f.leaf_slice(atom_id)] = 1.0
    return MartFunction(f, vals)


# ---------------------------------------------------------------------------
# Conditional calculus


def _check_partition(f: Filtration, atom_ids: Sequence[int]) -> list[int]:
    try:
        atoms = [f.atoms[i] for i in atom_ids]
    except (IndexError, TypeError) as exc:
        raise PartitionError(f"unknown atom id in partition: {exc}") from None
    atoms = sorted(atoms, key=lambda a: a.a)
    lo, hi = f.interval
    scale = max(hi - lo, 1.0)
    if not atoms or abs(atoms[0].a - lo) > _GEOM_TOL * scale or abs(atoms[-1].b - hi) > _GEOM_TOL * scale:
        raise PartitionError("atoms do not span the base interval")
    for u, v in zip(atoms, atoms[1:]):
        if abs(u.b - v.a) > _GEOM_TOL * scale:
            raise PartitionError(f"gap or overlap between atoms {u.id} and {v.id}")
    return [a.id for a in atoms]


def _atom_average(f: MartFunction, atom_id: int) -> np.ndarray:
    filt = f.filtration
    sl = filt.leaf_slice(atom_id)
    m = filt.leaf_measures()[sl]
    # One fixed accumulation per atom: identical inputs give identical floats,
    # so differences of unchanged atoms cancel exactly.
    return m @ f.values[sl] / filt.atoms[atom_id].measure


def average(f: MartFunction, atom_id: int) -> np.ndarray:
    """Measure-weighted mean <f>_J as a vector of length dim."""
    return _atom_average(f, atom_id)


def cond_exp(f: MartFunction, partition: Sequence[int]) -> MartFunction:
    """Project onto functions constant on the given partition atoms."""
    ids = _check_partition(f.filtration, partition)
    out = np.empty_like(f.values)
    for atom_id in ids:
        out[f.filtration.leaf_slice(atom_id)] = _atom_average(f, atom_id)
    return MartFunction(f.filtration, out)


def delta_split(f: MartFunction, event: SplitEvent) -> MartFunction:
    """Single-split martingale difference for one schedule event.

    Computed directly as (child average - parent average) inside the split
    atom and exact zero outside, which agrees with the difference of the two
    partition projections.
    """
    filt = f.filtration
    atom = filt.atoms[event.atom]
    if not atom.children:
        raise ValueError(f"atom {atom.id} has no split event")
    out = np.zeros_like(f.values)
    parent_avg = _atom_average(f, atom.id)
    for c in atom.children:
        out[filt.leaf_slice(c)] = _atom_average(f, c) - parent_avg
    return MartFunction(filt, out)


def osc2(f: MartFunction, atom_id: int) -> float:
    """Mean squared oscillation over one atom: <|f - <f>_J|^2>_J.

    The alternative form <|f|^2>_J - |<f>_J|^2 agrees up to roundoff; the
    centered form is returned because it is nonnegative by construction.
    """
    filt = f.filtration
    sl = filt.leaf_slice(atom_id)
    m = filt.leaf_measures()[sl]
    centered = f.values[sl] - _atom_average(f, atom_id)[None, :]
    return float(m @ np.einsum("ij,ij->i", centered, centered) / filt.atoms[atom_id].measure)


def inner(f: MartFunction, g: MartFunction) -> float:
    """Unnormalized pairing integral_I <f, g> dt."""
    _check_same_space(f, g)
    m = f.filtration.leaf_measures()
    return float(m @ np.einsum("ij,ij->i", f.values, g.values))


def l2_norm(f: MartFunction) -> float:
    return float(np.sqrt(max(inner(f, f), 0.0)))


def lp_norm(f: MartFunction, p: float) -> float:
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    m = f.filtration.leaf_measures()
    mags = np.linalg.norm(f.values, axis=1)
    return float((m @ mags**p) ** (1.0 / p))


def pointwise_dot(f: MartFunction, g: MartFunction) -> MartFunction:
    """Scalar function t -> <f(t), g(t)>."""
    _check_same_space(f, g)
    return MartFunction(f.filtration, np.einsum("ij,ij->i", f.values, g.values)[:, None])


def pointwise_scale(scalar: MartFunction, f: MartFunction) -> MartFunction:
    """Multiply a (possibly vector) function by a scalar function leafwise."""
    if scalar.dim != 1:
        raise ValueError("first argument must be scalar valued")
    if scalar.filtration is not f.filtration:
        raise ValueError("functions live on different filtration objects")
    return MartFunction(f.filtration, f.values * scalar.values)


def restrict(f: MartFunction, atom_id: int) -> MartFunction:
    """Multiply by the indicator of one atom (extension by zero)."""
    out = np.zeros_like(f.values)
    sl = f.filtration.leaf_slice(atom_id)
    out[sl] = f.values[sl]
    return MartFunction(f.filtration, out)


# ---------------------------------------------------------------------------
# Level machinery shared with the transform module


@lru_cache(maxsize=64)
def _level_leaf_maps(f: Filtration) -> tuple[np.ndarray, ...]:
    """For each level n, an int array mapping leaf position -> index of the
    A_n atom containing that leaf (in level partition order)."""
    maps = []
    for n in range(f.depth + 1):
        idx = np.empty(f.n_leaves, dtype=int)
        for j, atom_id in enumerate(f.levels[n]):
            idx[f.leaf_slice(atom_id)] = j
        idx.flags.writeable = False
        maps.append(idx)
    return tuple(maps)


@lru_cache(maxsize=64)
def _averaging_matrices(f: Filtration) -> tuple[np.ndarray, ...]:
    """Dense projection matrices P_n with (P_n v)_i = <v>_{A_n atom of leaf i}.

    Assembled from the block structure directly; used by the transform
    module's matrix route, independently of ``cond_exp``.
    """
    m = _np_leaf_measures(f)
    mats = []
    for n in range(f.depth + 1):
        P = np.zeros((f.n_leaves, f.n_leaves))
        for atom_id in f.levels[n]:
            sl = f.leaf_slice(atom_id)
            P[sl, sl] = m[sl] / f.atoms[atom_id].measure
        P.flags.writeable = False
        mats.append(P)
    return tuple(mats)


def _np_leaf_measures(f: Filtration) -> np.ndarray:
    return f.leaf_measures()


# ---------------------------------------------------------------------------
# Serialization


def function_to_json(f: MartFunction) -> str:
    payload = {
        "dim": f.dim,
        "values": [
            {"atom_id": atom_id, "coords": f.values[i].tolist()}
            for i, atom_id in enumerate(f.filtration.leaves)
        ],
    }
    return json.dumps(payload)


def function_from_json(filt: Filtration, text: str) -> MartFunction:
    payload = json.loads(text)
    d = int(payload["dim"])
    vals = np.zeros((filt.n_leaves, d))
    seen = set()
    for rec in payload["values"]:
        vals[filt.leaf_index(int(rec["atom_id"]))] = np.asarray(rec["coords"], dtype=float)
        seen.add(int(rec["atom_id"]))
    if seen != set(filt.leaves):
        raise ValueError("serialized values do not cover the leaves")
    return MartFunction(filt, vals)

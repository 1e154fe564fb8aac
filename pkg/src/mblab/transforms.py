"""Martingale transforms: predictable-multiplier contractions of L^2(I, R^d).

A transform on a depth-N filtration is the scalar-valued operator

    T f = sum_{n=1..N} a_n . (E_n f - E_{n-1} f),

where each multiplier a_n is an R^d-valued function constant on the atoms of
the level n-1 partition (predictable) with |a_n| <= 1 pointwise, and the dot
is the R^d inner product applied leafwise.  Such operators are L^2
contractions, and they localize: a function living in the range of one
single-split difference at atom J is mapped to a function supported in J.

Each operator carries two representations that are kept deliberately
independent and cross-checked by the test suite:

  * the multiplier formula above, evaluated through conditional expectations;
  * a materialized matrix with rows indexed by leaves and columns indexed by
    (leaf, coordinate) pairs in row-major order (column = leaf * dim + coord).

The adjoint is computed from the matrix by weight-conjugated transposition;
for transforms it also has the closed form T* g = sum_n a_n * (D_n g) with
D_n the scalar level-n difference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .filtration import Filtration, level_partition
from .martingale import (
    MartFunction,
    _averaging_matrices,
    _level_leaf_maps,
    cond_exp,
    delta_split,
)

__all__ = [
    "MartingaleTransform",
    "PredictabilityError",
    "ContractionError",
    "make_transform",
    "operator_norm",
    "predictable_hull",
    "transform_to_json",
    "transform_from_json",
]

_NORM_TOL = 1e-9


class PredictabilityError(ValueError):
    """Multiplier data is not constant on the coarser-level atoms or exceeds
    the unit ball."""


class ContractionError(RuntimeError):
    """Construction-time norm check failed; signals an assembly bug."""


@dataclass(frozen=True, eq=False)
class MartingaleTransform:
    """Immutable transform.  ``multipliers[n-1]`` holds the level-n multiplier
    as an array of shape (len(A_{n-1}), dim), rows in level partition order.
    ``matrix`` maps flattened (leaf, coord) inputs to leaf outputs."""

    filtration: Filtration
    dim: int
    multipliers: tuple[np.ndarray, ...]
    matrix: np.ndarray

    @property
    def n_levels(self) -> int:
        return len(self.multipliers)

    def multiplier_on_leaves(self, n: int) -> np.ndarray:
        """Level-n multiplier expanded to leaf resolution, shape (L, dim)."""
        leaf_map = _level_leaf_maps(self.filtration)[n - 1]
        return self.multipliers[n - 1][leaf_map]

    def apply(self, f: MartFunction) -> MartFunction:
        """T f through the multiplier formula."""
        self._check_input(f)
        out = np.zeros((self.filtration.n_leaves, 1))
        prev = cond_exp(f, level_partition(self.filtration, 0))
        for n in range(1, self.filtration.depth + 1):
            cur = cond_exp(f, level_partition(self.filtration, n))
            diff = cur.values - prev.values
            out[:, 0] += np.einsum("ij,ij->i", self.multiplier_on_leaves(n), diff)
            prev = cur
        return MartFunction(self.filtration, out)

    def matrix_apply(self, f: MartFunction) -> MartFunction:
        """T f through the materialized matrix; must agree with apply()."""
        self._check_input(f)
        flat = f.values.reshape(-1)
        return MartFunction(self.filtration, (self.matrix @ flat)[:, None])

    def adjoint_apply(self, g: MartFunction) -> MartFunction:
        """T* g via the weight-conjugated transpose of the matrix."""
        if g.filtration is not self.filtration or g.dim != 1:
            raise ValueError("adjoint expects a scalar function on the same filtration")
        m = self.filtration.leaf_measures()
        w_in = np.repeat(m, self.dim)
        # (W_in)^-1 M^T W_out acting on g.
        flat = (self.matrix.T * m[None, :]) @ g.values[:, 0]
        flat /= w_in
        return MartFunction(self.filtration, flat.reshape(-1, self.dim))

    def adjoint_closed_form(self, g: MartFunction) -> MartFunction:
        """T* g = sum_n a_n * (E_n g - E_{n-1} g); the independent route."""
        if g.filtration is not self.filtration or g.dim != 1:
            raise ValueError("adjoint expects a scalar function on the same filtration")
        out = np.zeros((self.filtration.n_leaves, self.dim))
        prev = cond_exp(g, level_partition(self.filtration, 0))
        for n in range(1, self.filtration.depth + 1):
            cur = cond_exp(g, level_partition(self.filtration, n))
            out += self.multiplier_on_leaves(n) * (cur.values - prev.values)
            prev = cur
        return MartFunction(self.filtration, out)

    def _check_input(self, f: MartFunction) -> None:
        if f.filtration is not self.filtration:
            raise ValueError("function lives on a different filtration object")
        if f.dim != self.dim:
            raise ValueError(f"dimension mismatch: transform {self.dim}, function {f.dim}")


def make_transform(
    filtration: Filtration,
    multipliers: Sequence[np.ndarray | MartFunction],
    dim: int | None = None,
) -> MartingaleTransform:
    """Validate multiplier data, materialize the matrix, and norm-check.

    Each entry of ``multipliers`` gives the level-n multiplier (n = 1..depth)
    either as an array of shape (len(A_{n-1}), dim) in level partition order,
    or as leaf-resolution data (shape (n_leaves, dim) or a MartFunction) that
    is checked for constancy on the level n-1 atoms.
    """
    if len(multipliers) != filtration.depth:
        raise PredictabilityError(
            f"need {filtration.depth} multiplier levels, got {len(multipliers)}"
        )
    rows: list[np.ndarray] = []
    for n, raw in enumerate(multipliers, start=1):
        if isinstance(raw, MartFunction):
            raw = raw.values
        arr = np.atleast_2d(np.asarray(raw, dtype=float))
        atoms = level_partition(filtration, n - 1)
        if arr.shape[0] == len(atoms):
            per_atom = arr
        elif arr.shape[0] == filtration.n_leaves:
            per_atom = _reduce_to_level(filtration, arr, n - 1)
        else:
            raise PredictabilityError(
                f"level {n} multiplier has {arr.shape[0]} rows; expected "
                f"{len(atoms)} (per atom) or {filtration.n_leaves} (per leaf)"
            )
        if dim is None:
            dim = per_atom.shape[1]
        if per_atom.shape[1] != dim:
            raise PredictabilityError(f"level {n} multiplier dimension mismatch")
        mags = np.linalg.norm(per_atom, axis=1)
        if mags.max(initial=0.0) > 1.0 + 1e-12:
            raise PredictabilityError(
                f"level {n} multiplier leaves the unit ball (max |a| = {mags.max():.6g})"
            )
        row = per_atom.copy()
        row.flags.writeable = False
        rows.append(row)
    assert dim is not None
    matrix = _materialize_matrix(filtration, rows, dim)
    op = MartingaleTransform(filtration, dim, tuple(rows), matrix)
    norm = operator_norm(op)
    if norm > 1.0 + _NORM_TOL:
        raise ContractionError(f"operator norm {norm} exceeds 1; assembly bug")
    return op


def _reduce_to_level(filtration: Filtration, leaf_vals: np.ndarray, level: int) -> np.ndarray:
    out = []
    for atom_id in filtration.levels[level]:
        block = leaf_vals[filtration.leaf_slice(atom_id)]
        if not np.all(block == block[0]):
            raise PredictabilityError(
                f"multiplier is not constant on atom {atom_id} of level {level}"
            )
        out.append(block[0])
    return np.array(out)


def _materialize_matrix(
    filtration: Filtration, rows: Sequence[np.ndarray], dim: int
) -> np.ndarray:
    """Assemble T as a dense (L, L*dim) matrix from block averaging matrices."""
    P = _averaging_matrices(filtration)
    L = filtration.n_leaves
    leaf_maps = _level_leaf_maps(filtration)
    tensor = np.zeros((L, L, dim))
    for n in range(1, filtration.depth + 1):
        D = P[n] - P[n - 1]
        a_leaf = rows[n - 1][leaf_maps[n - 1]]
        tensor += a_leaf[:, None, :] * D[:, :, None]
    out = tensor.reshape(L, L * dim)
    out.flags.writeable = False
    return out


def operator_norm(op: MartingaleTransform) -> float:
    """Largest singular value of W_out^(1/2) M W_in^(-1/2)."""
    m = op.filtration.leaf_measures()
    w_out = np.sqrt(m)
    w_in = np.sqrt(np.repeat(m, op.dim))
    scaled = op.matrix * w_out[:, None] / w_in[None, :]
    return float(np.linalg.svd(scaled, compute_uv=False)[0])


def predictable_hull(op_or_filt: MartingaleTransform | Filtration, f: MartFunction) -> list[list[int]]:
    """Per level n, the atoms of A_{n-1} on which the level-n difference of f
    is not zero.  These are the smallest predictable events containing the
    level differences; the transform of f vanishes outside their union.

    Zero is judged against 1e-12 times the magnitude of f: averages over
    atoms whose content is mean-zero cancel only up to roundoff, so a strict
    bit test would promote every ancestor of genuine activity into the hull.
    """
    filt = op_or_filt.filtration if isinstance(op_or_filt, MartingaleTransform) else op_or_filt
    if f.filtration is not filt:
        raise ValueError("function lives on a different filtration object")
    threshold = 1e-12 * max(1.0, float(np.max(np.abs(f.values))) if f.values.size else 0.0)
    events: list[list[int]] = []
    prev = cond_exp(f, level_partition(filt, 0))
    for n in range(1, filt.depth + 1):
        cur = cond_exp(f, level_partition(filt, n))
        diff = cur.values - prev.values
        hull = [
            atom_id
            for atom_id in filt.levels[n - 1]
            if float(np.max(np.abs(diff[filt.leaf_slice(atom_id)]))) > threshold
        ]
        events.append(hull)
        prev = cur
    return events


# ---------------------------------------------------------------------------
# Serialization


def transform_to_json(op: MartingaleTransform) -> str:
    payload = {
        "multipliers": [
            {
                "level": n,
                "values": [
                    {"atom_id": atom_id, "coords": op.multipliers[n - 1][j].tolist()}
                    for j, atom_id in enumerate(op.filtration.levels[n - 1])
                ],
            }
            for n in range(1, op.filtration.depth + 1)
        ]
    }
    return json.dumps(payload)


def transform_from_json(filtration: Filtration, text: str) -> MartingaleTransform:
    payload = json.loads(text)
    by_level: dict[int, dict[int, list[float]]] = {}
    for entry in payload["multipliers"]:
        by_level[int(entry["level"])] = {
            int(rec["atom_id"]): [float(c) for c in rec["coords"]] for rec in entry["values"]
        }
    rows = []
    for n in range(1, filtration.depth + 1):
        if n not in by_level:
            raise ValueError(f"serialized transform is missing level {n}")
        level_map = by_level[n]
        rows.append(np.array([level_map[a] for a in filtration.levels[n - 1]]))
    return make_transform(filtration, rows)

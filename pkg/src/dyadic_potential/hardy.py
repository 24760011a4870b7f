"""Hardy operator, its adjoint, potentials and energies.

Every operator runs in time linear in the node count.  On a tree the Hardy sum
``I f(a) = sum_{b >= a} f(b)`` is a top-down sweep and the adjoint
``I* f(a) = sum_{b <= a} f(b)`` a bottom-up one.  On a bi-tree the adjoint is
one bottom-up sweep per axis, and the Hardy sum is the summed-area recurrence

    I f(a) = f(a) + I f(parent_x a) + I f(parent_y a) - I f(parent_xy a)

evaluated one level block ``(k_x, k_y)`` at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _sweeps
from .errors import GeometryError, SizeLimitError
from .geometry import (
    BoundaryMeasure,
    BoundarySet,
    NodeFunction,
    NodeSet,
    TreeGeometry,
    restrict_measure,
    shadow_and_downset,
)

FSUM_THRESHOLD = 1 << 20
MAX_KERNEL_BOUNDARY = 4096


def accurate_sum(values) -> float:
    """Sum with correctly rounded ``math.fsum`` once the term count passes 2**20."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size > FSUM_THRESHOLD:
        return math.fsum(values)
    return float(values.sum())


# -- array-level kernels (no validation; used by hot loops) ------------------


def adjoint_array(geometry, node_values):
    """``I*`` of a node array shaped like ``geometry.shape``; returns a new array."""
    out = np.array(node_values, dtype=float, copy=True).reshape(geometry.shape)
    for axis, tree in enumerate(geometry.factors):
        _sweeps.up_accumulate(out, tree.depth, axis)
    return out


def _hardy_bitree(geometry, f):
    tx, ty = geometry.x, geometry.y
    out = np.empty_like(f)
    sl = _sweeps.level_slice
    for kx in range(tx.depth + 1):
        for ky in range(ty.depth + 1):
            block = f[sl(kx), sl(ky)].copy()
            if kx:
                block += np.repeat(out[sl(kx - 1), sl(ky)], 2, axis=0)
            if ky:
                block += np.repeat(out[sl(kx), sl(ky - 1)], 2, axis=1)
            if kx and ky:
                block -= np.repeat(np.repeat(out[sl(kx - 1), sl(ky - 1)], 2, axis=0), 2, axis=1)
            out[sl(kx), sl(ky)] = block
    return out


def hardy_array(geometry, node_values):
    """``I`` of a node array shaped like ``geometry.shape``; returns a new array."""
    f = np.array(node_values, dtype=float, copy=True).reshape(geometry.shape)
    if isinstance(geometry, TreeGeometry):
        return _sweeps.down_accumulate(f, geometry.depth)
    return _hardy_bitree(geometry, f)


def boundary_of(geometry, node_array):
    """Boundary entries of a node array, flattened in boundary-index order."""
    g = np.asarray(node_array).reshape(geometry.shape)
    if isinstance(geometry, TreeGeometry):
        return g[geometry.boundary_slice]
    return g[geometry.x.boundary_slice, geometry.y.boundary_slice].reshape(-1)


def measure_array(geometry, masses):
    out = np.zeros(geometry.shape)
    if isinstance(geometry, TreeGeometry):
        out[geometry.boundary_slice] = masses
    else:
        out[geometry.x.boundary_slice, geometry.y.boundary_slice] = np.reshape(
            masses, geometry.boundary_shape
        )
    return out


def potential_array(geometry, masses):
    """``V = I I* mu`` for raw boundary masses (signs not checked)."""
    return hardy_array(geometry, adjoint_array(geometry, measure_array(geometry, masses)))


# -- public operations --------------------------------------------------------


def adjoint_sum(obj) -> NodeFunction:
    """``I*`` of a boundary measure (the rectangle masses ``mu(R_a)``) or of a node function."""
    if isinstance(obj, BoundaryMeasure):
        vals = obj.node_values()
    elif isinstance(obj, NodeFunction):
        vals = obj.grid
    else:
        raise GeometryError(f"cannot apply I* to {type(obj).__name__}")
    return NodeFunction(obj.geometry, adjoint_array(obj.geometry, vals))


def hardy_sum(f: NodeFunction) -> NodeFunction:
    return NodeFunction(f.geometry, hardy_array(f.geometry, f.grid))


@dataclass(frozen=True, eq=False)
class PotentialField:
    """``V^mu`` on all nodes; ``delta`` is set for the truncated potential ``V_delta``."""

    field: NodeFunction
    delta: float | None = None

    @property
    def geometry(self):
        return self.field.geometry

    @property
    def values(self):
        return self.field.values

    @property
    def grid(self):
        return self.field.grid

    def boundary_values(self):
        return self.field.boundary_values()

    def __getitem__(self, a):
        return self.field[a]

    @property
    def provenance(self):
        return "plain" if self.delta is None else f"truncated(delta={self.delta!r})"


def _check_delta(delta):
    if not delta > 0:
        raise GeometryError(f"delta must be positive, got {delta!r}")
    if delta > 1:
        raise GeometryError(f"delta must lie in (0, 1], got {delta!r}")


def truncation_set(mu: BoundaryMeasure, delta: float) -> NodeSet:
    """``E_delta = {a : V^mu(a) < delta}`` (an up-set, since V grows toward the boundary)."""
    _check_delta(delta)
    V = potential_array(mu.geometry, mu.masses)
    return NodeSet(mu.geometry, V < delta)


def potential(mu: BoundaryMeasure, delta: float | None = None) -> PotentialField:
    """``V^mu``, or with ``delta`` the truncated ``V_delta^mu`` summing ``mu(R)`` over ancestors in ``E_delta``."""
    geometry = mu.geometry
    rect = adjoint_array(geometry, mu.node_values())
    if delta is None:
        return PotentialField(NodeFunction(geometry, hardy_array(geometry, rect)))
    _check_delta(delta)
    V = hardy_array(geometry, rect)
    masked = np.where(V < delta, rect, 0.0)
    return PotentialField(NodeFunction(geometry, hardy_array(geometry, masked)), float(delta))


@dataclass(frozen=True)
class EnergyReport:
    total: float
    local: float | None = None
    restricted: float | None = None
    truncated: float | None = None

    def to_dict(self):
        return {
            "total": self.total,
            "local": self.local,
            "restricted": self.restricted,
            "truncated": self.truncated,
        }


def energy(mu: BoundaryMeasure, E: BoundarySet | None = None, delta: float | None = None,
           restricted: bool = False) -> EnergyReport:
    """Energy ``sum_a mu(R_a)^2`` plus the optional local, restricted and truncated variants.

    ``local`` and ``restricted`` need ``E``; ``local`` is always filled when ``E``
    is given, ``restricted`` only when asked for.
    """
    geometry = mu.geometry
    rect = adjoint_array(geometry, mu.node_values())
    sq = rect * rect
    total = accurate_sum(sq)
    local = restr = trunc = None
    if E is not None:
        if E.geometry != geometry:
            raise GeometryError("set and measure live on different geometries")
        _, RE = shadow_and_downset(E)
        local = accurate_sum(sq[RE.grid])
        if restricted:
            r = adjoint_array(geometry, restrict_measure(mu, E).node_values())
            restr = accurate_sum(r * r)
    elif restricted:
        raise GeometryError("restricted energy requires a set E")
    if delta is not None:
        _check_delta(delta)
        V = hardy_array(geometry, rect)
        trunc = accurate_sum(sq[V < delta])
    return EnergyReport(total, local, restr, trunc)


def energy_by_integration(mu: BoundaryMeasure) -> float:
    """``int V^mu dmu``: the energy computed through the potential instead of rectangle masses."""
    V = boundary_of(mu.geometry, potential_array(mu.geometry, mu.masses))
    return accurate_sum(V * mu.masses)


def mutual_energy(mu: BoundaryMeasure, E: BoundarySet, F: BoundarySet) -> float:
    """``int V^{mu|E} d(mu|F) = sum_a (mu|E)(R_a) (mu|F)(R_a)``."""
    geometry = mu.geometry
    a = adjoint_array(geometry, restrict_measure(mu, E).node_values())
    b = adjoint_array(geometry, restrict_measure(mu, F).node_values())
    return accurate_sum(a * b)


def _tree_kernel(tree, b1, b2):
    return tree.depth + 1 - (int(b1) ^ int(b2)).bit_length()


def boundary_kernel(geometry, w, w2) -> float:
    """Number of nodes above both boundary points ``w`` and ``w2`` (given as boundary indices).

    With it ``V^rho(w) = sum_{w'} K(w, w') rho(w')``.
    """
    for b in (w, w2):
        if not 0 <= int(b) < geometry.n_boundary:
            raise GeometryError(f"boundary index {b} out of range")
    if isinstance(geometry, TreeGeometry):
        return float(_tree_kernel(geometry, w, w2))
    n = geometry.y.n_boundary
    (x1, y1), (x2, y2) = divmod(int(w), n), divmod(int(w2), n)
    return float(_tree_kernel(geometry.x, x1, x2) * _tree_kernel(geometry.y, y1, y2))


def _tree_kernel_matrix(tree, idx):
    idx = np.asarray(idx, dtype=np.int64)
    x = idx[:, None] ^ idx[None, :]
    bitlen = np.zeros(x.shape, dtype=np.int64)
    nz = x > 0
    bitlen[nz] = np.floor(np.log2(x[nz])).astype(np.int64) + 1
    return (tree.depth + 1 - bitlen).astype(float)


def kernel_matrix(geometry, indices=None, max_size=MAX_KERNEL_BOUNDARY):
    """Dense ``K`` restricted to the given boundary indices (all by default)."""
    idx = np.arange(geometry.n_boundary) if indices is None else np.asarray(indices, dtype=int)
    if idx.size > max_size:
        raise SizeLimitError(f"dense kernel on {idx.size} points exceeds {max_size}")
    if isinstance(geometry, TreeGeometry):
        return _tree_kernel_matrix(geometry, idx)
    n = geometry.y.n_boundary
    bx, by = np.divmod(idx, n)
    return _tree_kernel_matrix(geometry.x, bx) * _tree_kernel_matrix(geometry.y, by)


__all__ = [
    "EnergyReport",
    "PotentialField",
    "accurate_sum",
    "adjoint_sum",
    "boundary_kernel",
    "energy",
    "energy_by_integration",
    "hardy_sum",
    "kernel_matrix",
    "mutual_energy",
    "potential",
    "truncation_set",
]

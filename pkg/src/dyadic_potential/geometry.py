"""Finite dyadic trees, bi-trees, and the measures, functions and sets living on them.

Nodes are addressed by integer ids in level-order (heap) layout: the node with
index ``j`` on level ``k`` of a tree has id ``2**k - 1 + j``.  A bi-tree node is
the pair ``(x_id, y_id)`` and has flat id ``x_id * |T_y| + y_id``, so a node
function reshaped C-order to ``geometry.shape`` is a ``(|T_x|, |T_y|)`` grid.

Boundary nodes are addressed separately by boundary index: ``j`` on a tree,
``bx * 2**Ny + by`` on a bi-tree.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _sweeps
from .errors import GeometryError, SizeLimitError

MAX_DEPTH = 20
MAX_BITREE_NODES = 1 << 24


def _readonly(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class Order(str, enum.Enum):
    BELOW = "below"
    ABOVE = "above"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class TreeGeometry:
    """Complete binary tree of the given depth; level ``depth`` is the boundary."""

    depth: int

    def __post_init__(self):
        if not isinstance(self.depth, (int, np.integer)) or isinstance(self.depth, bool):
            raise GeometryError(f"depth must be an integer, got {self.depth!r}")
        if self.depth < 0:
            raise SizeLimitError(f"depth must be >= 0, got {self.depth}")

    kind = "tree"

    @property
    def n_nodes(self) -> int:
        return (1 << (self.depth + 1)) - 1

    @property
    def n_boundary(self) -> int:
        return 1 << self.depth

    @property
    def shape(self):
        return (self.n_nodes,)

    @property
    def boundary_shape(self):
        return (self.n_boundary,)

    @property
    def factors(self):
        return (self,)

    def node(self, level, index) -> int:
        if not 0 <= level <= self.depth or not 0 <= index < (1 << level):
            raise GeometryError(f"no node (level={level}, index={index}) in depth-{self.depth} tree")
        return (1 << level) - 1 + index

    def check_node(self, a) -> int:
        if isinstance(a, tuple):
            raise GeometryError(f"bi-tree node {a!r} given to a tree geometry")
        a = int(a)
        if not 0 <= a < self.n_nodes:
            raise GeometryError(f"node id {a} out of range for depth-{self.depth} tree")
        return a

    def level(self, a) -> int:
        return (int(a) + 1).bit_length() - 1

    def index_in_level(self, a) -> int:
        a = int(a)
        return a + 1 - (1 << self.level(a))

    def parent(self, a):
        a = int(a)
        return None if a == 0 else (a - 1) // 2

    def children(self, a):
        a = int(a)
        if self.level(a) == self.depth:
            return ()
        return (2 * a + 1, 2 * a + 2)

    def sibling(self, a):
        a = int(a)
        if a == 0:
            return None
        return a + 1 if a % 2 == 1 else a - 1

    def is_boundary(self, a) -> bool:
        return self.level(a) == self.depth

    def boundary_node(self, b) -> int:
        return self.n_boundary - 1 + int(b)

    def boundary_index(self, a) -> int:
        if not self.is_boundary(a):
            raise GeometryError(f"node {a} is not on the boundary")
        return int(a) - (self.n_boundary - 1)

    def ancestor_at(self, a, level) -> int:
        """Ancestor of ``a`` on ``level`` (``a`` itself when levels agree)."""
        shift = self.level(a) - level
        if shift < 0:
            raise GeometryError(f"node {a} has no ancestor on deeper level {level}")
        return ((int(a) + 1) >> shift) - 1

    def ancestors(self, a):
        """``a`` and all its ancestors, bottom-up (root last)."""
        out = [int(a)]
        while out[-1] != 0:
            out.append((out[-1] - 1) // 2)
        return out

    def boundary_range(self, a):
        """Half-open range of boundary indices below ``a``."""
        k = self.level(a)
        width = 1 << (self.depth - k)
        j = self.index_in_level(a)
        return j * width, (j + 1) * width

    @cached_property
    def levels(self):
        """Level of every node, as a read-only int array."""
        return _readonly(np.repeat(np.arange(self.depth + 1), 1 << np.arange(self.depth + 1)))

    def level_slice(self, k):
        return _sweeps.level_slice(k)

    @property
    def boundary_slice(self):
        return _sweeps.level_slice(self.depth)


@dataclass(frozen=True)
class BiTreeGeometry:
    """Product ``T_x × T_y`` of two dyadic trees, ordered by rectangle containment."""

    x: TreeGeometry
    y: TreeGeometry

    kind = "bitree"

    @property
    def n_nodes(self) -> int:
        return self.x.n_nodes * self.y.n_nodes

    @property
    def n_boundary(self) -> int:
        return self.x.n_boundary * self.y.n_boundary

    @property
    def shape(self):
        return (self.x.n_nodes, self.y.n_nodes)

    @property
    def boundary_shape(self):
        return (self.x.n_boundary, self.y.n_boundary)

    @property
    def factors(self):
        return (self.x, self.y)

    @property
    def depth(self):
        return (self.x.depth, self.y.depth)

    def node(self, x_id, y_id) -> int:
        return self.x.check_node(x_id) * self.y.n_nodes + self.y.check_node(y_id)

    def check_node(self, a) -> int:
        if isinstance(a, tuple):
            if len(a) != 2:
                raise GeometryError(f"bi-tree node must be a pair, got {a!r}")
            return self.node(*a)
        a = int(a)
        if not 0 <= a < self.n_nodes:
            raise GeometryError(f"node id {a} out of range for bi-tree of shape {self.shape}")
        return a

    def split(self, a):
        return divmod(self.check_node(a), self.y.n_nodes)

    def level(self, a):
        ax, ay = self.split(a)
        return self.x.level(ax), self.y.level(ay)

    def is_boundary(self, a) -> bool:
        ax, ay = self.split(a)
        return self.x.is_boundary(ax) and self.y.is_boundary(ay)

    def boundary_node(self, b) -> int:
        bx, by = divmod(int(b), self.y.n_boundary)
        return self.node(self.x.boundary_node(bx), self.y.boundary_node(by))

    def boundary_index(self, a) -> int:
        ax, ay = self.split(a)
        return self.x.boundary_index(ax) * self.y.n_boundary + self.y.boundary_index(ay)

    def ancestors(self, a):
        ax, ay = self.split(a)
        return [self.node(px, py) for px in self.x.ancestors(ax) for py in self.y.ancestors(ay)]


Geometry = TreeGeometry | BiTreeGeometry


def build_tree(depth, max_depth=MAX_DEPTH) -> TreeGeometry:
    if not isinstance(depth, (int, np.integer)) or isinstance(depth, bool):
        raise GeometryError(f"depth must be an integer, got {depth!r}")
    if depth < 0 or depth > max_depth:
        raise SizeLimitError(f"tree depth {depth} outside [0, {max_depth}]")
    return TreeGeometry(int(depth))


def build_bitree(depth_x, depth_y=None, max_depth=MAX_DEPTH, max_nodes=MAX_BITREE_NODES) -> BiTreeGeometry:
    depth_y = depth_x if depth_y is None else depth_y
    geom = BiTreeGeometry(build_tree(depth_x, max_depth), build_tree(depth_y, max_depth))
    if geom.n_nodes > max_nodes:
        raise SizeLimitError(f"bi-tree with {geom.n_nodes} nodes exceeds the limit of {max_nodes}")
    return geom


def _tree_order(tree, a, b):
    if a == b:
        return Order.EQUAL
    la, lb = tree.level(a), tree.level(b)
    if la > lb and tree.ancestor_at(a, lb) == b:
        return Order.BELOW
    if lb > la and tree.ancestor_at(b, la) == a:
        return Order.ABOVE
    return Order.INCOMPARABLE


def order_relation(geometry, a, b) -> Order:
    """Relation of ``a`` to ``b``: BELOW means ``R_a`` is strictly inside ``R_b``."""
    a, b = geometry.check_node(a), geometry.check_node(b)
    if isinstance(geometry, TreeGeometry):
        return _tree_order(geometry, a, b)
    (ax, ay), (bx, by) = geometry.split(a), geometry.split(b)
    rx, ry = _tree_order(geometry.x, ax, bx), _tree_order(geometry.y, ay, by)
    if rx == ry:
        return rx
    if Order.EQUAL in (rx, ry):
        other = ry if rx == Order.EQUAL else rx
        return other
    return Order.INCOMPARABLE


def generation(geometry, a):
    """Dyadic generation: the level for a tree node, the level pair for a bi-tree node."""
    a = geometry.check_node(a)
    return geometry.level(a)


def _check_same(geometry, other, what):
    if geometry != other:
        raise GeometryError(f"{what} lives on {other}, expected {geometry}")


@dataclass(frozen=True, eq=False)
class NodeFunction:
    """Real values on every node, stored flat in node-id order."""

    geometry: Geometry
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size != self.geometry.n_nodes:
            raise GeometryError(f"expected {self.geometry.n_nodes} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise GeometryError("node function has non-finite values")
        object.__setattr__(self, "values", _readonly(vals.reshape(-1)))

    @classmethod
    def zeros(cls, geometry):
        return cls(geometry, np.zeros(geometry.n_nodes))

    @property
    def grid(self):
        return self.values.reshape(self.geometry.shape)

    def boundary_values(self):
        """Values on boundary nodes, in boundary-index order."""
        g = self.grid
        if isinstance(self.geometry, TreeGeometry):
            return g[self.geometry.boundary_slice]
        return g[self.geometry.x.boundary_slice, self.geometry.y.boundary_slice].reshape(-1)

    def __getitem__(self, a):
        return float(self.values[self.geometry.check_node(a)])

    def norm_sq(self) -> float:
        from .hardy import accurate_sum

        return accurate_sum(self.values * self.values)


@dataclass(frozen=True, eq=False)
class BoundaryMeasure:
    """Nonnegative masses on the boundary nodes, in boundary-index order."""

    geometry: Geometry
    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float).reshape(-1)
        if m.size != self.geometry.n_boundary:
            raise GeometryError(f"expected {self.geometry.n_boundary} masses, got {m.size}")
        if not np.all(np.isfinite(m)):
            raise GeometryError("measure has non-finite masses")
        if np.any(m < 0):
            raise GeometryError(f"negative mass at boundary index {int(np.argmax(m < 0))}")
        object.__setattr__(self, "masses", _readonly(m))

    @classmethod
    def zeros(cls, geometry):
        return cls(geometry, np.zeros(geometry.n_boundary))

    @classmethod
    def atom(cls, geometry, b, mass=1.0):
        m = np.zeros(geometry.n_boundary)
        m[b] = mass
        return cls(geometry, m)

    @classmethod
    def uniform(cls, geometry, total=1.0):
        return cls(geometry, np.full(geometry.n_boundary, total / geometry.n_boundary))

    @property
    def total(self) -> float:
        from .hardy import accurate_sum

        return accurate_sum(self.masses)

    @property
    def grid(self):
        return self.masses.reshape(self.geometry.boundary_shape)

    def support(self) -> BoundarySet:
        return BoundarySet(self.geometry, self.masses > 0)

    def node_values(self):
        """The measure as a node array (zero on interior nodes), shaped like the geometry."""
        out = np.zeros(self.geometry.shape)
        if isinstance(self.geometry, TreeGeometry):
            out[self.geometry.boundary_slice] = self.masses
        else:
            out[self.geometry.x.boundary_slice, self.geometry.y.boundary_slice] = self.grid
        return out

    def mass_of(self, E) -> float:
        from .hardy import accurate_sum

        _check_same(self.geometry, E.geometry, "set")
        return accurate_sum(self.masses[E.mask])

    def scaled(self, c) -> BoundaryMeasure:
        return BoundaryMeasure(self.geometry, self.masses * c)


@dataclass(frozen=True, eq=False)
class BoundarySet:
    """Membership mask over boundary indices."""

    geometry: Geometry
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool).reshape(-1)
        if m.size != self.geometry.n_boundary:
            raise GeometryError(f"expected {self.geometry.n_boundary} flags, got {m.size}")
        object.__setattr__(self, "mask", _readonly(m))

    @classmethod
    def from_indices(cls, geometry, indices):
        m = np.zeros(geometry.n_boundary, dtype=bool)
        idx = np.asarray(list(indices), dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= geometry.n_boundary):
            raise GeometryError("boundary index out of range")
        m[idx] = True
        return cls(geometry, m)

    @classmethod
    def full(cls, geometry):
        return cls(geometry, np.ones(geometry.n_boundary, dtype=bool))

    @classmethod
    def empty(cls, geometry):
        return cls(geometry, np.zeros(geometry.n_boundary, dtype=bool))

    def indices(self):
        return np.flatnonzero(self.mask)

    def __len__(self):
        return int(self.mask.sum())

    def __bool__(self):
        return bool(self.mask.any())

    def __contains__(self, b):
        return bool(self.mask[int(b)])

    def __and__(self, other):
        _check_same(self.geometry, other.geometry, "set")
        return BoundarySet(self.geometry, self.mask & other.mask)

    def __or__(self, other):
        _check_same(self.geometry, other.geometry, "set")
        return BoundarySet(self.geometry, self.mask | other.mask)

    def __invert__(self):
        return BoundarySet(self.geometry, ~self.mask)

    def __eq__(self, other):
        return (
            isinstance(other, BoundarySet)
            and self.geometry == other.geometry
            and bool(np.array_equal(self.mask, other.mask))
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Membership mask over all node ids."""

    geometry: Geometry
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool).reshape(-1)
        if m.size != self.geometry.n_nodes:
            raise GeometryError(f"expected {self.geometry.n_nodes} flags, got {m.size}")
        object.__setattr__(self, "mask", _readonly(m))

    @property
    def grid(self):
        return self.mask.reshape(self.geometry.shape)

    def indices(self):
        return np.flatnonzero(self.mask)

    def __len__(self):
        return int(self.mask.sum())

    def __bool__(self):
        return bool(self.mask.any())

    def __contains__(self, a):
        return bool(self.mask[self.geometry.check_node(a)])

    def __invert__(self):
        return NodeSet(self.geometry, ~self.mask)

    def __eq__(self, other):
        return (
            isinstance(other, NodeSet)
            and self.geometry == other.geometry
            and bool(np.array_equal(self.mask, other.mask))
        )

    __hash__ = None


def _boundary_block(geometry, boundary_mask):
    out = np.zeros(geometry.shape, dtype=bool)
    if isinstance(geometry, TreeGeometry):
        out[geometry.boundary_slice] = boundary_mask
    else:
        out[geometry.x.boundary_slice, geometry.y.boundary_slice] = boundary_mask.reshape(
            geometry.boundary_shape
        )
    return out


def shadow_and_downset(E: BoundarySet):
    """Return ``(U_E, R_E)``.

    ``U_E`` is represented by ``E`` itself.  ``R_E`` holds every node whose
    boundary descendants all lie in ``E``.
    """
    geometry = E.geometry
    mask = _boundary_block(geometry, E.mask)
    for axis, tree in enumerate(geometry.factors):
        _sweeps.up_all(mask, tree.depth, axis)
    return E, NodeSet(geometry, mask)


def restrict_measure(mu: BoundaryMeasure, E: BoundarySet) -> BoundaryMeasure:
    _check_same(mu.geometry, E.geometry, "set")
    return BoundaryMeasure(mu.geometry, np.where(E.mask, mu.masses, 0.0))


@dataclass(frozen=True, eq=False)
class StoppingFamily:
    """An antichain of tree nodes with the region ``W(S)`` below it and its complement ``O(S)``."""

    geometry: TreeGeometry
    members: tuple = field(default=())

    def __post_init__(self):
        if not isinstance(self.geometry, TreeGeometry):
            raise GeometryError("stopping families live on a single tree")
        members = tuple(sorted(self.geometry.check_node(a) for a in self.members))
        if len(set(members)) != len(members):
            raise GeometryError("stopping family has repeated members")
        object.__setattr__(self, "members", members)
        w = self._below_members()
        for a in members:
            p = self.geometry.parent(a)
            if p is not None and w[p]:
                raise GeometryError(f"stopping family is not an antichain: {a} lies below another member")

    def _below_members(self):
        w = np.zeros(self.geometry.n_nodes, dtype=bool)
        w[list(self.members)] = True
        return _sweeps.down_any(w, self.geometry.depth)

    @cached_property
    def W(self) -> NodeSet:
        return NodeSet(self.geometry, self._below_members())

    @cached_property
    def O(self) -> NodeSet:  # noqa: E743
        return ~self.W

    def member_indicator(self):
        out = np.zeros(self.geometry.n_nodes)
        out[list(self.members)] = 1.0
        return out

    def __len__(self):
        return len(self.members)

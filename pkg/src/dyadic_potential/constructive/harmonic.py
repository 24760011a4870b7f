"""Super-harmonicity tests and the two-point minimum principle on a tree."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CertificateError, GeometryError, PreconditionError
from ..geometry import NodeFunction, TreeGeometry
from ..hardy import hardy_array

HARMONIC_RTOL = 1e-12


@dataclass(frozen=True)
class HarmonicCheck:
    holds: bool
    node: int | None = None
    slack: float = 0.0  # most negative value of lhs - rhs (0 when it holds)


def _tree_of(h):
    if not isinstance(h.geometry, TreeGeometry):
        raise GeometryError("harmonicity is checked on a single tree")
    return h.geometry


def _children_sums(tree, v):
    n_int = tree.n_nodes - tree.n_boundary
    return v[1:].reshape(-1, 2).sum(axis=1)[:n_int] if n_int else np.zeros(0)


def superharmonicity_check(h: NodeFunction, kind: str = "two_point",
                           rtol: float = HARMONIC_RTOL) -> HarmonicCheck:
    """``two_point``: ``h(t) >= h(t1) + h(t2)`` at interior nodes.
    ``three_point``: ``h(t) >= (h(t1) + h(t2) + h(father))/3`` at interior non-root nodes.
    """
    tree = _tree_of(h)
    v = h.values
    n_int = tree.n_nodes - tree.n_boundary
    if n_int == 0:
        return HarmonicCheck(True)
    kids = _children_sums(tree, v)
    lhs = v[:n_int]
    if kind == "two_point":
        rhs = kids
        nodes = np.arange(n_int)
    elif kind == "three_point":
        nodes = np.arange(1, n_int)
        lhs = v[nodes]
        rhs = (kids[nodes] + v[(nodes - 1) // 2]) / 3
    else:
        raise GeometryError(f"unknown harmonicity kind {kind!r}")
    gap = lhs - rhs
    scale = rtol * np.maximum(np.abs(lhs), np.abs(rhs)) + 1e-300
    bad = np.flatnonzero(gap < -scale)
    if bad.size:
        return HarmonicCheck(False, int(nodes[bad[0]]), float(gap.min()))
    return HarmonicCheck(True, None, 0.0)


def harmonicity_check(h: NodeFunction, rtol: float = HARMONIC_RTOL) -> HarmonicCheck:
    """Two-point harmonic: ``h(t) = h(t1) + h(t2)`` at interior nodes."""
    tree = _tree_of(h)
    v = h.values
    n_int = tree.n_nodes - tree.n_boundary
    if n_int == 0:
        return HarmonicCheck(True)
    kids = _children_sums(tree, v)
    gap = v[:n_int] - kids
    bad = np.flatnonzero(np.abs(gap) > rtol * np.maximum(np.abs(v[:n_int]), np.abs(kids)) + 1e-300)
    if bad.size:
        return HarmonicCheck(False, int(bad[0]), float(gap[bad[0]]))
    return HarmonicCheck(True)


@dataclass(frozen=True)
class MinPrincipleResult:
    """``holds`` or a descent witness.

    The witness is the good vertex ``good`` (``Ig < IG`` and ``g < G`` there)
    and the branch ``path`` from its child down to the boundary point
    ``omega`` where ``g < G`` at every step and ``Ig(omega) < IG(omega)``.
    """

    holds: bool
    good: int | None = None
    path: tuple = ()
    omega: int | None = None
    meta: dict = field(default_factory=dict)


def min_principle_check(g: NodeFunction, G: NodeFunction, rtol: float = HARMONIC_RTOL,
                        start: int | None = None) -> MinPrincipleResult:
    """Two-point minimum principle for ``IG <= Ig``.

    If ``IG <= Ig`` on ``P = {G > 0} cap boundary`` the conclusion on the whole
    tree is asserted (a failure raises ``CertificateError``).  Otherwise the
    constructive witness is returned: climb from a violating node to a good
    vertex, then descend through children with ``g < G``.
    """
    tree = _tree_of(g)
    if G.geometry != tree:
        raise GeometryError("g and G must live on one tree")
    gv, Gv = g.values, G.values
    for name, v in (("g_nonnegative", gv), ("G_nonnegative", Gv)):
        bad = np.flatnonzero(v < 0)
        if bad.size:
            raise PreconditionError(name, f"value {v[bad[0]]} < 0", node=int(bad[0]))
    chk = superharmonicity_check(g, "two_point", rtol)
    if not chk.holds:
        raise PreconditionError("g_two_point_superharmonic", "g(t) < g(t1) + g(t2)", node=chk.node)
    chk = harmonicity_check(G, rtol)
    if not chk.holds:
        raise PreconditionError("G_two_point_harmonic", "G(t) != G(t1) + G(t2)", node=chk.node)

    Ig, IG = hardy_array(tree, gv), hardy_array(tree, Gv)
    tol = rtol * (tree.depth + 2) * max(float(np.abs(Ig).max()), float(np.abs(IG).max()), 1e-300)
    bnd = tree.boundary_slice
    P = np.zeros(tree.n_nodes, dtype=bool)
    P[bnd] = Gv[bnd] > 0
    violated = np.flatnonzero(IG > Ig + tol)
    if not (P[violated]).any():
        if violated.size:
            raise CertificateError("minimum principle conclusion fails although its hypothesis holds",
                                   node=int(violated[0]))
        return MinPrincipleResult(True, meta={"P_size": int(P.sum())})

    beta = int(start) if start is not None else int(violated[P[violated]][0])
    if not IG[beta] > Ig[beta] + tol:
        raise GeometryError(f"start node {beta} does not violate IG <= Ig")
    climbed = [beta]
    while not gv[beta] < Gv[beta]:
        beta = tree.parent(beta)
        climbed.append(beta)
    good = beta
    path = []
    node = good
    while not tree.is_boundary(node):
        kids = [c for c in tree.children(node) if gv[c] < Gv[c]]
        if not kids:
            raise CertificateError("descent stalled: no child with g < G", node=node)
        node = kids[0]
        path.append(node)
    omega = node if path else good
    return MinPrincipleResult(False, good, tuple(path), omega,
                              {"climb": climbed, "P_size": int(P.sum())})


def validate_descent_witness(g: NodeFunction, G: NodeFunction, result: MinPrincipleResult) -> bool:
    """Independent check of a witness: a parent-child chain ending on the boundary, ``g < G`` along it,
    ``Ig < IG`` at the good vertex and at ``omega``, and ``omega`` in ``P``."""
    tree = _tree_of(g)
    if result.holds or result.good is None:
        return False
    gv, Gv = g.values, G.values
    chain = [result.good, *result.path]
    for a, b in zip(chain, chain[1:]):
        if tree.parent(b) != a:
            return False
    omega = chain[-1]
    if omega != result.omega or not tree.is_boundary(omega):
        return False
    if not all(gv[c] < Gv[c] for c in chain):
        return False

    def ancestors_sum(v, a):
        return sum(v[b] for b in tree.ancestors(a))

    return (ancestors_sum(gv, result.good) < ancestors_sum(Gv, result.good)
            and ancestors_sum(gv, omega) < ancestors_sum(Gv, omega) and Gv[omega] > 0)

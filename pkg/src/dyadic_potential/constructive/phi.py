"""The small-energy majorant on a single tree.

Given ``sigma``, a stopping family ``S`` and ``f`` vanishing below ``S``, the
function

    Phi(a) = If(b) * I*sigma(a) / lam   if  sum_{b >= a' >= a} I*sigma(a') <= lam
    Phi(a) = 0                          otherwise (and on O(S)),

for ``a <= b in S`` satisfies ``I Phi >= (lam - 1)/lam * If`` on ``F`` and
``||Phi||^2 <= 8/lam ||f||^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CertificateError, GeometryError, PreconditionError
from ..geometry import (
    BoundaryMeasure,
    BoundarySet,
    NodeFunction,
    StoppingFamily,
    TreeGeometry,
)
from ..hardy import accurate_sum, adjoint_array, hardy_array, measure_array

PHI_GATE = 3.0
NORM_CONSTANT = 8.0
IDENTITY_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class MajorantResult:
    """A majorant with its certified bounds and the measured quantities they control.

    ``lower_factor`` is the guaranteed ratio ``I phi / I f`` on ``F`` for the
    single-tree construction; ``lower_bound`` is the guaranteed value of
    ``I phi`` on ``F`` (``lower_factor * min_F If``).
    """

    phi: NodeFunction
    lower_bound: float | None
    lower_factor: float | None
    norm_sq: float
    norm_bound: float
    lam: float
    F: BoundarySet
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "lower_bound": self.lower_bound,
            "lower_factor": self.lower_factor,
            "norm_sq": self.norm_sq,
            "norm_bound": self.norm_bound,
            "F": [int(i) for i in self.F.indices()],
            "meta": self.meta,
        }


def _first(mask):
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def check_phi_preconditions(sigma, S, f, F, lam, *, gate=PHI_GATE, upper_strict=True,
                            upper_slack=0.0, rtol=IDENTITY_RTOL):
    """Raise ``PreconditionError`` naming the first failed hypothesis; returns ``V^sigma``."""
    tree = sigma.geometry
    if not isinstance(tree, TreeGeometry):
        raise GeometryError("the single-tree majorant needs a tree geometry")
    for obj in (S, f, F):
        if obj.geometry != tree:
            raise GeometryError("sigma, S, f and F must share one tree")
    if not lam > gate:
        raise PreconditionError("lambda_gate", f"lambda = {lam} must exceed {gate}")
    O = S.O.mask
    W = S.W.mask
    if not O.any():
        raise PreconditionError("O(S)_nonempty", "O(S) is empty")
    fv = f.values
    bad = _first(fv < 0)
    if bad is not None:
        raise PreconditionError("f_nonnegative", f"f = {fv[bad]} < 0", node=bad)
    bad = _first(W & (fv != 0))
    if bad is not None:
        raise PreconditionError("f_zero_on_W", f"f = {fv[bad]} != 0 inside W(S)", node=bad)
    F_nodes = np.asarray([tree.boundary_node(b) for b in F.indices()], dtype=int)
    outside = F_nodes[~W[F_nodes]] if F_nodes.size else F_nodes
    if outside.size:
        raise PreconditionError("F_in_W", "F point outside W(S)", node=int(outside[0]))
    V = hardy_array(tree, adjoint_array(tree, measure_array(tree, sigma.masses)))
    if F_nodes.size:
        low = F_nodes[V[F_nodes] < lam * (1 - rtol)]
        if low.size:
            a = int(low[0])
            raise PreconditionError("gela", f"V^sigma = {V[a]} < lambda = {lam} on F", node=a)
    over = O & (V >= 1) if upper_strict else O & (V > 1 + upper_slack)
    bad = _first(over)
    if bad is not None:
        cmp = "< 1" if upper_strict else f"<= {1 + upper_slack!r}"
        raise PreconditionError("le1", f"V^sigma = {V[bad]} violates {cmp} on O(S)", node=bad)
    return V


def build_phi_majorant(sigma: BoundaryMeasure, S: StoppingFamily, f: NodeFunction, F: BoundarySet,
                       lam: float, *, gate: float = PHI_GATE, upper_strict: bool = True,
                       upper_slack: float = 0.0, rtol: float = IDENTITY_RTOL) -> MajorantResult:
    """Build ``Phi`` and re-verify both certificates on the output.

    ``gate`` is the lower limit on ``lam`` (the 2/3 guarantee needs ``lam > 3``;
    the construction itself works for any ``lam > 1``).  ``upper_strict=False`` accepts
    ``V^sigma <= 1 + upper_slack`` on ``O(S)``, which is what stopping at
    ``> 1 + upper_slack`` provides; the guaranteed ratio then drops to
    ``(lam - 1 - upper_slack) / lam``.
    """
    if gate < 1:
        raise GeometryError("gate below 1 voids the lower bound")
    if upper_strict:
        upper_slack = 0.0
    check_phi_preconditions(sigma, S, f, F, lam, gate=gate, upper_strict=upper_strict,
                            upper_slack=upper_slack, rtol=rtol)
    tree = sigma.geometry
    W = S.W.mask
    rect = adjoint_array(tree, measure_array(tree, sigma.masses))
    rect_S = np.where(W, rect, 0.0)
    V_S = hardy_array(tree, rect_S)  # partial sums from the member of S down to the node
    If = hardy_array(tree, f.values)  # constant below each member since f = 0 on W(S)
    values = np.where(W & (V_S <= lam), If * rect_S / lam, 0.0)
    phi = NodeFunction(tree, values)

    norm_sq = phi.norm_sq()
    f_sq = f.norm_sq()
    norm_bound = NORM_CONSTANT / lam * f_sq
    factor = (lam - 1 - upper_slack) / lam
    F_nodes = np.asarray([tree.boundary_node(b) for b in F.indices()], dtype=int)
    IPhi = hardy_array(tree, values)
    lower = float(factor * If[F_nodes].min()) if F_nodes.size else None
    if F_nodes.size:
        need = factor * If[F_nodes]
        short = IPhi[F_nodes] < need - rtol * np.maximum(need, 1.0)
        if short.any():
            a = int(F_nodes[short][0])
            raise CertificateError(f"I Phi = {IPhi[a]} below {factor} * If = {factor * If[a]}",
                                   node=a)
    if norm_sq > norm_bound * (1 + rtol) + 1e-300:
        raise CertificateError(f"||Phi||^2 = {norm_sq} exceeds 8/lambda ||f||^2 = {norm_bound}")
    pos = F_nodes[If[F_nodes] > 0] if F_nodes.size else F_nodes
    meta = {
        "S": [int(a) for a in S.members],
        "min_ratio_IPhi_If": float(np.min(IPhi[pos] / If[pos])) if pos.size else None,
        "norm_ratio": float(norm_sq * lam / f_sq) if f_sq > 0 else None,
    }
    return MajorantResult(phi, lower, factor, norm_sq, norm_bound, float(lam), F, meta)

"""Majorants on the bi-tree, assembled from single-tree majorants on horizontal slices.

For each y-node ``a_y`` the slice ``T_x x {a_y}`` carries

    G(g_x) = sum_{a' >= a_y} mu(g_x x a'),   f(g_x) = mu(g_x x a_y),

with ``I_x G = V^mu( . x a_y)``.  A stopping family on ``I_x G > 1`` and the
single-tree majorant at level ``theta * lam`` give ``Phi^{a_y}``, and
``phi(g_x, a_y) = Phi^{a_y}(g_x)``.  The cut level ``alpha(w)`` of a point
``w`` in ``F`` is the largest y-ancestor of ``w_y`` with
``V^mu(w_x x alpha) >= theta * lam``; only slices between ``w_y`` and
``alpha(w)`` are charged with ``w``.  With the default ``theta = 1/3`` this
yields ``I phi >= 4 lam / 9`` on ``F`` and ``||phi||^2 <= 24 / lam * E[mu]``.
"""

from __future__ import annotations

import numpy as np

from .. import _sweeps
from ..errors import CertificateError, GeometryError, PreconditionError
from ..geometry import (
    BiTreeGeometry,
    BoundaryMeasure,
    BoundarySet,
    NodeFunction,
    StoppingFamily,
)
from ..hardy import accurate_sum, adjoint_array, boundary_of, hardy_array, measure_array
from .equilibrium import EQUILIBRIUM_TOLERANCE, equilibrium_measure
from .harmonic import min_principle_check, superharmonicity_check
from .phi import NORM_CONSTANT, MajorantResult, build_phi_majorant
from .stopping import stopping_members

BITREE_LAMBDA_GATE = 9.0
DEFAULT_THETA = 1.0 / 3.0
TREE_FACTOR = 2.0 / 3.0
IDENTITY_RTOL = 1e-12


def _check_bitree(mu):
    if not isinstance(mu.geometry, BiTreeGeometry):
        raise GeometryError("bi-tree majorants need a bi-tree measure")


def _check_gate(lam, theta, enforce_gate):
    if not 0 < theta < 1:
        raise GeometryError(f"theta must lie in (0, 1), got {theta}")
    level = theta * lam
    if enforce_gate:
        # the single-tree construction needs its level theta * lam >= 3 (lam >= 9 for theta = 1/3)
        if not level >= 3.0 * (1 - 1e-15):
            raise PreconditionError("lambda_gate", f"lambda = {lam} below the gate {3.0 / theta:g}")
    elif not level > 1 + 1e-9:
        raise PreconditionError("lambda_gate", f"theta * lambda = {level} must exceed 1")


def _lower_factor(level, upper=1.0):
    """Guaranteed ratio from the single-tree construction at ``level``, capped at 2/3."""
    return min(TREE_FACTOR, (level - upper) / level)


def _cut_levels(geometry, F, V, threshold):
    """``alpha(w)`` for each ``w`` in ``F``: first y-ancestor from the top with ``V >= threshold``."""
    tx, ty = geometry.x, geometry.y
    cuts = {}
    for w in F.indices():
        bx, by = divmod(int(w), ty.n_boundary)
        xn, yn = tx.boundary_node(bx), ty.boundary_node(by)
        chain = ty.ancestors(yn)[::-1]
        hit = [a for a in chain if V[xn, a] >= threshold]
        if not hit:
            raise PreconditionError("cut_level", f"no y-ancestor reaches {threshold}", node=int(w))
        cuts[int(w)] = hit[0]
    return cuts


def _slice_sets(geometry, cuts):
    """``F_{a_y}``: x boundary indices charged to each y-node."""
    ty = geometry.y
    out = {}
    for w, cut in cuts.items():
        bx, by = divmod(w, ty.n_boundary)
        yn = ty.boundary_node(by)
        top = ty.level(cut)
        for a in ty.ancestors(yn):
            if ty.level(a) < top:
                break
            out.setdefault(a, set()).add(bx)
    return out


def _verify_bitree(geometry, phi_grid, F, lower, norm_bound, rtol):
    Iphi = boundary_of(geometry, hardy_array(geometry, phi_grid))
    values = Iphi[F.mask]
    if values.size and values.min() < lower * (1 - rtol):
        w = int(F.indices()[np.argmin(values)])
        raise CertificateError(f"I phi = {values.min()} below the certified {lower}", node=w)
    norm_sq = accurate_sum(phi_grid**2)
    if norm_sq > norm_bound * (1 + rtol) + 1e-300:
        raise CertificateError(f"||phi||^2 = {norm_sq} exceeds the bound {norm_bound}")
    return norm_sq, (float(values.min()) if values.size else None)


def _slice_error(err, a_y):
    return PreconditionError(err.condition, f"{err.args[0]} (slice y-node {a_y})", node=err.node,
                             slice=a_y, **err.context)


def build_embedding_majorant(mu: BoundaryMeasure, F: BoundarySet, lam: float, *,
                             theta: float = DEFAULT_THETA, enforce_gate: bool = True,
                             rescale: bool = False, rtol: float = IDENTITY_RTOL) -> MajorantResult:
    """Majorant of ``V^mu`` on ``F`` with small energy, assuming ``V^mu <= 1`` on ``supp mu``.

    ``theta`` is the fraction of ``lam`` at which slices are cut (the
    construction uses 1/3); ``enforce_gate`` requires ``theta * lam >= 3``
    (``lam >= 9``), otherwise only ``theta * lam > 1`` is needed and the
    certificate weakens accordingly.  ``rescale`` multiplies ``phi`` so the
    certified lower bound becomes ``lam``.
    """
    _check_bitree(mu)
    _check_gate(lam, theta, enforce_gate)
    geometry = mu.geometry
    tx, ty = geometry.x, geometry.y
    rect = adjoint_array(geometry, mu.node_values())
    V = hardy_array(geometry, rect)
    Vb = boundary_of(geometry, V)
    supp = mu.masses > 0
    if supp.any() and Vb[supp].max() > 1 + rtol:
        w = int(np.flatnonzero(supp & (Vb > 1 + rtol))[0])
        raise PreconditionError("V_le_1_on_support", f"V^mu = {Vb[w]} > 1 on supp mu", node=w)
    if F.mask.any() and Vb[F.mask].min() < lam * (1 - rtol):
        w = int(np.flatnonzero(F.mask & (Vb < lam * (1 - rtol)))[0])
        raise PreconditionError("V_ge_lambda_on_F", f"V^mu = {Vb[w]} < lambda = {lam} on F", node=w)

    level = theta * lam
    upper = 1 + 4 * rtol  # stopping threshold; absorbs rounding of V = 1 on the support
    factor = _lower_factor(level, upper)
    lower = factor * (1 - theta) * lam
    energy = accurate_sum(rect**2)
    norm_bound = NORM_CONSTANT / level * energy

    G_all = _sweeps.down_accumulate(rect.copy(), ty.depth, axis=1)
    cuts = _cut_levels(geometry, F, V, level)
    charged = _slice_sets(geometry, cuts)
    phi = np.zeros(geometry.shape)
    slices = {}
    for a_y in sorted(charged):
        G = G_all[:, a_y]
        if G.max() > 1 + rtol:
            raise CertificateError(f"slice function G exceeds 1 on slice {a_y}", slice=a_y)
        members = stopping_members(tx, V[:, a_y], upper, ">")
        S = StoppingFamily(tx, tuple(int(a) for a in members))
        f = rect[:, a_y]
        if np.any(f[S.W.mask] != 0):
            raise CertificateError(f"f is nonzero below the stopping family on slice {a_y}", slice=a_y)
        if members.size and V[members, a_y].max() > 2 * upper:
            raise CertificateError(f"stopping value above 2 on slice {a_y}", slice=a_y)
        sigma = BoundaryMeasure(tx, G[tx.boundary_slice])
        Fy = BoundarySet.from_indices(tx, sorted(charged[a_y]))
        try:
            res = build_phi_majorant(sigma, S, NodeFunction(tx, f), Fy, level, gate=upper,
                                     upper_strict=False, upper_slack=upper - 1, rtol=rtol)
        except PreconditionError as err:
            raise _slice_error(err, a_y) from err
        phi[:, a_y] = res.phi.values
        slices[int(a_y)] = {"S": [int(a) for a in members], "F": sorted(int(b) for b in charged[a_y]),
                            "norm_ratio": res.meta["norm_ratio"]}

    norm_sq, min_Iphi = _verify_bitree(geometry, phi, F, lower, norm_bound, rtol)
    scale = lam / lower if rescale else 1.0
    meta = {
        "theta": theta,
        "tree_level": level,
        "cut_levels": {str(w): int(a) for w, a in cuts.items()},
        "slices": {str(k): v for k, v in slices.items()},
        "energy": energy,
        "min_Iphi_on_F": min_Iphi,
        "norm_ratio": norm_sq * lam / energy if energy > 0 else None,
        "rescaled": bool(rescale),
        "guaranteed_lower": 4 * lam / 9,
    }
    return MajorantResult(NodeFunction(geometry, phi * scale), lower * scale, factor,
                          norm_sq * scale**2, norm_bound * scale**2, float(lam), F, meta)


def build_truncated_majorant(mu: BoundaryMeasure, F: BoundarySet, lam: float, delta: float = 1.0, *,
                             theta: float = DEFAULT_THETA, enforce_gate: bool = True,
                             rescale: bool = False, rtol: float = IDENTITY_RTOL,
                             eq_tolerance: float = EQUILIBRIUM_TOLERANCE) -> MajorantResult:
    """Majorant of the truncated potential ``V_delta^mu`` on ``F`` with energy ``~ delta/lam E_delta``.

    Works on ``nu = mu / delta`` and ``E_1 = {V^nu < 1}``.  On each slice the
    sums ``g_1`` run only over rectangles in ``E_1``; the role of ``sigma`` is
    played by ``theta * lam/delta`` times the equilibrium measure of the
    charged points, whose potential is kept below ``I g_1`` by the two-point
    minimum principle.  The gate applies to ``lam / delta``.
    """
    _check_bitree(mu)
    if not 0 < delta <= 1:
        raise GeometryError(f"delta must lie in (0, 1], got {delta}")
    if not lam >= 1:
        raise PreconditionError("lambda_ge_1", f"lambda = {lam} < 1")
    Lam = lam / delta
    _check_gate(Lam, theta, enforce_gate)
    geometry = mu.geometry
    tx, ty = geometry.x, geometry.y
    rect = adjoint_array(geometry, mu.node_values()) / delta
    V = hardy_array(geometry, rect)
    E1 = V < 1
    rect1 = np.where(E1, rect, 0.0)
    V1 = hardy_array(geometry, rect1)
    V1b = boundary_of(geometry, V1)
    if F.mask.any() and V1b[F.mask].min() < Lam * (1 - rtol):
        w = int(np.flatnonzero(F.mask & (V1b < Lam * (1 - rtol)))[0])
        raise PreconditionError("V_delta_ge_lambda_on_F",
                                f"V_delta^mu = {V1b[w] * delta} < lambda = {lam} on F", node=w)
    energy1 = accurate_sum(rect1**2)  # E_1[nu] = E_delta[mu] / delta^2
    level = theta * Lam
    slack = max(rtol, 4 * eq_tolerance)  # equilibrium residuals enter every comparison
    factor = _lower_factor(level * (1 - slack), 1 + slack)
    lower = factor * (1 - theta) * Lam
    norm_bound = NORM_CONSTANT / level * energy1 * (1 + slack)
    if not E1.any():
        phi = np.zeros(geometry.shape)
        meta = {"theta": theta, "E1_empty": True, "energy_delta": 0.0}
        return MajorantResult(NodeFunction(geometry, phi), lower * delta, factor, 0.0, 0.0,
                              float(lam), F, meta)

    g_all = _sweeps.down_accumulate(rect1.copy(), ty.depth, axis=1)
    cuts = _cut_levels(geometry, F, V1, level)
    charged = _slice_sets(geometry, cuts)
    phi = np.zeros(geometry.shape)
    slices = {}
    for a_y in sorted(charged):
        g1 = NodeFunction(tx, g_all[:, a_y])
        if not superharmonicity_check(g1, "two_point", rtol).holds:
            raise CertificateError(f"g_1 is not two-point super-harmonic on slice {a_y}", slice=a_y)
        Ig1 = V1[:, a_y]
        members = stopping_members(tx, Ig1, 1.0, ">=")
        S = StoppingFamily(tx, tuple(int(a) for a in members))
        f1 = rect1[:, a_y]
        if np.any(f1[S.W.mask] != 0):
            raise CertificateError(f"f_1 is nonzero below the stopping family on slice {a_y}", slice=a_y)
        if members.size and Ig1[members].max() > 2 + rtol:
            raise CertificateError(f"stopping value above 2 on slice {a_y}", slice=a_y)
        Fy = BoundarySet.from_indices(tx, sorted(charged[a_y]))
        rho = equilibrium_measure(Fy, eq_tolerance)
        Vrho = boundary_of(tx, hardy_array(tx, adjoint_array(tx, measure_array(tx, rho.masses))))
        # scale so that V^sigma <= level on supp rho; V^sigma >= level (1 - 2 tol) on F_{a_y}
        sigma = BoundaryMeasure(tx, rho.masses * (level / Vrho[rho.masses > 0].max()))
        G = adjoint_array(tx, measure_array(tx, sigma.masses))
        mp = min_principle_check(g1, NodeFunction(tx, G), rtol=slack)
        if not mp.holds:
            raise CertificateError(f"minimum principle hypothesis fails on slice {a_y}",
                                   slice=a_y, node=mp.omega)
        Vsig = hardy_array(tx, G)
        lam_slice = float(Vsig[[tx.boundary_node(b) for b in Fy.indices()]].min())
        try:
            res = build_phi_majorant(sigma, S, NodeFunction(tx, f1), Fy, lam_slice, gate=1 + slack,
                                     upper_strict=False, upper_slack=slack, rtol=slack)
        except PreconditionError as err:
            raise _slice_error(err, a_y) from err
        phi[:, a_y] = res.phi.values
        slices[int(a_y)] = {"S": [int(a) for a in members], "F": sorted(int(b) for b in charged[a_y]),
                            "tree_level": lam_slice, "norm_ratio": res.meta["norm_ratio"]}

    norm_sq, min_Iphi = _verify_bitree(geometry, phi, F, lower, norm_bound, slack)
    # undo the rescaling mu -> mu / delta
    phi *= delta
    lower_out, norm_sq_out, bound_out = lower * delta, norm_sq * delta**2, norm_bound * delta**2
    energy_delta = energy1 * delta**2
    scale = lam / lower_out if rescale else 1.0
    meta = {
        "theta": theta,
        "delta": delta,
        "tree_level": level,
        "cut_levels": {str(w): int(a) for w, a in cuts.items()},
        "slices": {str(k): v for k, v in slices.items()},
        "energy_delta": energy_delta,
        "min_Iphi_on_F": None if min_Iphi is None else min_Iphi * delta,
        "norm_ratio": norm_sq_out * lam / (delta * energy_delta) if energy_delta > 0 else None,
        "rescaled": bool(rescale),
        "E1_empty": False,
    }
    return MajorantResult(NodeFunction(geometry, phi * scale), lower_out * scale, factor,
                          norm_sq_out * scale**2, bound_out * scale**2, float(lam), F, meta)

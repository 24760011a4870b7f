"""Peeling a measure down to the part where its own potential is large.

After rescaling to ``C = 3``, repeatedly strip the points of the remaining
support where the potential of the remaining measure is at most 1.  What is
left, ``nu~``, has ``V^{nu~} >= C/3`` on its support and keeps at least a
sixth of the energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CertificateError, GeometryError, PreconditionError
from ..geometry import BoundaryMeasure, BoundarySet
from ..hardy import accurate_sum, adjoint_array, boundary_of, measure_array, potential_array

IDENTITY_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class PeelingResult:
    layers: tuple  # (E_j, sigma_j) in construction order, original scale
    residual_set: BoundarySet
    residual: BoundaryMeasure
    energy_before: float
    energy_after: float
    C: float
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "C": self.C,
            "layers": [[int(i) for i in E.indices()] for E, _ in self.layers],
            "residual_set": [int(i) for i in self.residual_set.indices()],
            "residual_masses": [float(x) for x in self.residual.masses],
            "energy_before": self.energy_before,
            "energy_after": self.energy_after,
            "meta": self.meta,
        }


def _energy(g, masses):
    rect = adjoint_array(g, measure_array(g, masses))
    return accurate_sum(rect**2)


def peel_measure(nu: BoundaryMeasure, C: float, rtol: float = IDENTITY_RTOL) -> PeelingResult:
    """Peel ``nu`` assuming ``E[nu] >= C |nu|``; both guarantees are re-verified on the output."""
    if not C > 0:
        raise GeometryError(f"C must be positive, got {C}")
    g = nu.geometry
    total = nu.total
    energy = _energy(g, nu.masses)
    if energy < C * total * (1 - rtol):
        raise PreconditionError("energy_ge_C_mass", f"E[nu] = {energy} < C |nu| = {C * total}")
    if total == 0:
        empty = BoundarySet.empty(g)
        return PeelingResult((), empty, nu, 0.0, 0.0, float(C), {"steps": 0})

    scale = 3.0 / C
    remaining = nu.masses > 0
    layers = []
    while True:
        masses = np.where(remaining, nu.masses, 0.0) * scale
        V = boundary_of(g, potential_array(g, masses))
        strip = remaining & (V <= 1)
        if not strip.any():
            break
        layers.append((BoundarySet(g, strip), BoundaryMeasure(g, np.where(strip, nu.masses, 0.0))))
        remaining = remaining & ~strip

    residual = BoundaryMeasure(g, np.where(remaining, nu.masses, 0.0))
    after = _energy(g, residual.masses)
    result = PeelingResult(tuple(layers), BoundarySet(g, remaining), residual, energy, after, float(C),
                           {"steps": len(layers)})
    verify_peeling(nu, result, rtol)
    return result


def verify_peeling(nu: BoundaryMeasure, result: PeelingResult, rtol: float = IDENTITY_RTOL):
    """Check disjointness, exact recomposition and both guarantees; raises ``CertificateError``."""
    g = nu.geometry
    seen = np.zeros(g.n_boundary, dtype=bool)
    recomposed = result.residual.masses.copy()
    for E, sigma in result.layers:
        if (seen & E.mask).any():
            raise CertificateError("peeling layers overlap")
        seen |= E.mask
        recomposed = recomposed + sigma.masses
    if (seen & result.residual_set.mask).any():
        raise CertificateError("residual set meets a layer")
    if not np.array_equal(recomposed, nu.masses):
        raise CertificateError("layers and residual do not recompose nu")
    if not np.array_equal(result.residual.masses, np.where(result.residual_set.mask, nu.masses, 0.0)):
        raise CertificateError("residual measure is not nu restricted to the residual set")
    C = result.C
    V = boundary_of(g, potential_array(g, result.residual.masses))
    on = result.residual_set.mask
    if on.any() and V[on].min() < C / 3 * (1 - rtol):
        raise CertificateError(f"V of the residual = {V[on].min()} < C/3 = {C / 3}")
    if result.energy_after < result.energy_before / 6 * (1 - rtol):
        raise CertificateError(
            f"residual energy {result.energy_after} < E[nu]/6 = {result.energy_before / 6}"
        )

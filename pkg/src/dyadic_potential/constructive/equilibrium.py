"""Equilibrium measures on subsets of a tree boundary.

The equilibrium measure of ``F`` minimizes ``1/2 rho^T K rho - sum rho`` over
``rho >= 0`` supported in ``F``; its optimality conditions are exactly
``V^rho = 1`` on ``supp rho`` and ``V^rho >= 1`` on ``F``.  Up to a Cholesky
factorization ``K = L L^T`` this is the nonnegative least-squares problem
``min ||L^T rho - L^{-1} 1||``, solved by the Lawson-Hanson active-set method
in ``scipy.optimize.nnls``.  Large sets fall back to projected gradient with
sweep-based matrix-vector products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, solve_triangular
from scipy.optimize import nnls

from ..errors import ConvergenceError, GeometryError
from ..geometry import BoundaryMeasure, BoundarySet, TreeGeometry
from ..hardy import boundary_of, kernel_matrix, potential_array

EQUILIBRIUM_TOLERANCE = 1e-9
MAX_DENSE = 4096


@dataclass(frozen=True)
class KKTResiduals:
    below_on_F: float  # max over F of 1 - V^rho
    off_on_support: float  # max over supp rho of |V^rho - 1|

    def within(self, tolerance):
        return self.below_on_F <= tolerance and self.off_on_support <= tolerance


def kkt_residuals(rho: BoundaryMeasure, F: BoundarySet) -> KKTResiduals:
    V = boundary_of(rho.geometry, potential_array(rho.geometry, rho.masses))
    supp = rho.masses > 0
    below = float(np.max(1 - V[F.mask])) if F.mask.any() else 0.0
    off = float(np.max(np.abs(V[supp] - 1))) if supp.any() else 0.0
    return KKTResiduals(max(below, 0.0), off)


def _dense(tree, idx):
    K = kernel_matrix(tree, idx, max_size=MAX_DENSE)
    c, _ = cho_factor(K, lower=True)
    L = np.tril(c)
    b = solve_triangular(L, np.ones(idx.size), lower=True)
    x, _ = nnls(L.T, b, maxiter=50 * idx.size)
    return x


def _projected_gradient(tree, idx, tolerance, max_iterations):
    """Accelerated projected gradient on ``1/2 x^T K x - sum x``, ``x >= 0``."""
    n = tree.n_boundary
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True

    def K(x):
        full = np.zeros(n)
        full[idx] = x
        return boundary_of(tree, potential_array(tree, full))[idx]

    step = 1.0 / float(np.max(K(np.ones(idx.size))))
    x = np.full(idx.size, 1.0 / (tree.depth + 1) / idx.size)
    y, t = x.copy(), 1.0
    for _ in range(max_iterations):
        x_new = np.maximum(y - step * (K(y) - 1.0), 0.0)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = x_new + (t - 1) / t_new * (x_new - x)
        x, t = x_new, t_new
        g = K(x) - 1.0
        if np.all(g >= -tolerance) and np.all(np.abs(g[x > 0]) <= tolerance):
            return x
    raise ConvergenceError("projected gradient did not reach the KKT tolerance", best=x)


def equilibrium_measure(F: BoundarySet, tolerance: float = EQUILIBRIUM_TOLERANCE, *,
                        max_dense: int = MAX_DENSE, max_iterations: int = 200_000) -> BoundaryMeasure:
    """Equilibrium measure of ``F`` on a single tree, checked against its KKT conditions."""
    tree = F.geometry
    if not isinstance(tree, TreeGeometry):
        raise GeometryError("equilibrium measures are computed on a single tree")
    if not F:
        raise GeometryError("equilibrium measure of the empty set")
    if not tolerance > 0:
        raise GeometryError("tolerance must be positive")
    idx = F.indices()
    if idx.size <= max_dense:
        x = _dense(tree, idx)
        method = "active_set"
    else:
        x = _projected_gradient(tree, idx, tolerance / 2, max_iterations)
        method = "projected_gradient"
    masses = np.zeros(tree.n_boundary)
    masses[idx] = x
    rho = BoundaryMeasure(tree, masses)
    res = kkt_residuals(rho, F)
    if not res.within(tolerance):
        raise ConvergenceError(
            f"{method} solution misses the KKT tolerance {tolerance}: {res}", best=rho, residuals=res
        )
    return rho

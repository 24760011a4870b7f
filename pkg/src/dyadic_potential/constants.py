"""The five testing constants of a boundary measure.

``box``, ``carleson``, ``rec`` and ``hereditary`` are maxima of energy ratios
over boundary sets; ``embedding`` is the squared norm of ``psi -> I*(psi mu)``
from ``L^2(mu)``.  Set maxima are exact by enumeration for small supports and
lower bounds by randomized hill climbing otherwise.

Subsets are enumerated over the support of ``mu``; every zero-mass boundary
point is added to the candidate set.  That completion can only enlarge
``R_E`` and leaves ``mu(E)`` and ``mu|E`` unchanged, so it is where each
objective peaks for a given support part.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DyadicError, GeometryError, SizeLimitError
from .geometry import BoundaryMeasure, BoundarySet, shadow_and_downset
from .hardy import (
    accurate_sum,
    adjoint_array,
    boundary_of,
    measure_array,
    potential_array,
)

MAX_EXHAUSTIVE = 20
MAX_HEREDITARY_EXHAUSTIVE = 12
DEFAULT_RESTARTS = 32
SPECTRAL_TOLERANCE = 1e-10
MAX_POWER_ITERATIONS = 10_000
TIE_RTOL = 1e-12
ORDER_RTOL = 1e-9
_CHUNK = 1 << 14

KINDS = ("box", "carleson", "rec", "hereditary", "embedding")


@dataclass(frozen=True)
class SearchStrategy:
    """How set maxima are computed.

    ``method`` is ``"exhaustive"``, ``"local_search"`` or ``"auto"`` (exhaustive
    when the support fits under the limit, search otherwise).
    """

    method: str = "auto"
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0
    max_exhaustive: int = MAX_EXHAUSTIVE

    def __post_init__(self):
        if self.method not in ("exhaustive", "local_search", "auto"):
            raise GeometryError(f"unknown search method {self.method!r}")
        if self.restarts < 1 or self.max_exhaustive < 1:
            raise GeometryError("restarts and max_exhaustive must be positive")

    @classmethod
    def exhaustive(cls, max_exhaustive=MAX_EXHAUSTIVE):
        return cls("exhaustive", max_exhaustive=max_exhaustive)

    @classmethod
    def local_search(cls, restarts=DEFAULT_RESTARTS, seed=0):
        return cls("local_search", restarts=restarts, seed=seed)

    def resolve(self, n_support, limit):
        limit = min(limit, self.max_exhaustive)
        if self.method == "exhaustive":
            if n_support > limit:
                raise SizeLimitError(
                    f"exhaustive search over {n_support} support atoms exceeds the limit {limit}"
                )
            return "exhaustive"
        if self.method == "auto":
            return "exhaustive" if n_support <= limit else "local_search"
        return "local_search"


@dataclass(frozen=True)
class ConstantReport:
    kind: str
    value: float
    method: str
    witness: object = ()
    meta: dict = field(default_factory=dict)

    @property
    def is_lower_bound(self) -> bool:
        return self.method == "local_search"

    def to_dict(self):
        w = self.witness
        if isinstance(w, dict):
            w = {k: [int(i) for i in v] for k, v in w.items()}
        elif self.kind == "embedding":
            w = [float(x) for x in w]
        else:
            w = [int(i) for i in w]
        return {
            "kind": self.kind,
            "value": float(self.value),
            "method": self.method,
            "witness": w,
            "meta": self.meta,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


# -- direct ratio evaluators (used to re-verify witnesses) --------------------


def _mass(mu, E):
    return mu.mass_of(E)


def local_energy_ratio(mu: BoundaryMeasure, E: BoundarySet):
    """``E_E[mu] / mu(E)``; ``None`` when ``mu(E) = 0``."""
    den = _mass(mu, E)
    if den <= 0:
        return None
    rect = adjoint_array(mu.geometry, mu.node_values())
    _, RE = shadow_and_downset(E)
    return accurate_sum(rect[RE.grid] ** 2) / den


def restricted_energy_ratio(mu: BoundaryMeasure, E: BoundarySet):
    """``E[mu|E] / mu(E)``; ``None`` when ``mu(E) = 0``."""
    den = _mass(mu, E)
    if den <= 0:
        return None
    masses = np.where(E.mask, mu.masses, 0.0)
    rect = adjoint_array(mu.geometry, measure_array(mu.geometry, masses))
    return accurate_sum(rect**2) / den


def hereditary_ratio(mu: BoundaryMeasure, E: BoundarySet, F: BoundarySet):
    """``sum_{R in R_F} mu(R cap U_E)^2 / mu(E cap F)``; ``None`` when the denominator is 0."""
    den = _mass(mu, E & F)
    if den <= 0:
        return None
    masses = np.where(E.mask, mu.masses, 0.0)
    rect = adjoint_array(mu.geometry, measure_array(mu.geometry, masses))
    _, RF = shadow_and_downset(F)
    return accurate_sum(rect[RF.grid] ** 2) / den


def embedding_ratio(mu: BoundaryMeasure, psi):
    """``sum_a I*(psi mu)(a)^2 / sum_w psi(w)^2 mu(w)``; ``None`` when the denominator is 0."""
    psi = np.asarray(psi, dtype=float)
    den = accurate_sum(psi * psi * mu.masses)
    if den <= 0:
        return None
    rect = adjoint_array(mu.geometry, measure_array(mu.geometry, psi * mu.masses))
    return accurate_sum(rect**2) / den


# -- box ----------------------------------------------------------------------


def box_constant(mu: BoundaryMeasure) -> ConstantReport:
    """``max_a sum_{b <= a} mu(R_b)^2 / mu(R_a)`` over nodes with ``mu(R_a) > 0``, in one pass."""
    g = mu.geometry
    rect = adjoint_array(g, mu.node_values()).reshape(-1)
    box_sums = adjoint_array(g, rect**2).reshape(-1)
    pos = rect > 0
    if not pos.any():
        return ConstantReport("box", 0.0, "exhaustive", (), {"node": None})
    ratio = np.zeros_like(rect)
    ratio[pos] = box_sums[pos] / rect[pos]
    best = float(ratio.max())
    node = int(np.flatnonzero(ratio >= best * (1 - TIE_RTOL))[0])
    return ConstantReport("box", best, "exhaustive", (node,), {"node": node})


# -- support bookkeeping for exhaustive enumeration ---------------------------


@dataclass(frozen=True, eq=False)
class _SupportData:
    """Support atoms and the positive-mass rectangles grouped by which atoms they contain."""

    atoms: np.ndarray  # boundary indices of the support, ascending
    masses: np.ndarray
    zero: np.ndarray  # boundary mask of zero-mass points
    need: np.ndarray  # uint32 bitmask of atoms under each group
    count: np.ndarray  # number of nodes in each group

    @property
    def n(self):
        return self.atoms.size

    @classmethod
    def build(cls, mu):
        atoms = np.flatnonzero(mu.masses > 0)
        g = mu.geometry
        need = np.zeros(g.n_nodes, dtype=np.int64)
        for i, b in enumerate(atoms):
            unit = np.zeros(g.n_boundary)
            unit[b] = 1.0
            under = adjoint_array(g, measure_array(g, unit)).reshape(-1) > 0
            need[under] |= 1 << i
        need = need[need > 0]
        groups, count = np.unique(need, return_counts=True)
        return cls(atoms, mu.masses[atoms], mu.masses == 0, groups.astype(np.uint32),
                   count.astype(float))

    def bits(self, masks):
        """``(len(masks), n)`` 0/1 matrix of subset bitmasks."""
        return ((masks[:, None] >> np.arange(self.n, dtype=np.uint32)) & 1).astype(float)

    def group_bits(self):
        return self.bits(self.need)  # (groups, n)

    def boundary_set(self, geometry, mask, with_zero=True):
        m = self.zero.copy() if with_zero else np.zeros(geometry.n_boundary, dtype=bool)
        m[self.atoms[[i for i in range(self.n) if mask >> i & 1]]] = True
        return BoundarySet(geometry, m)

    def key(self, *masks):
        idx = [[int(self.atoms[i]) for i in range(self.n) if m >> i & 1] for m in masks]
        return (sum(len(x) for x in idx), idx)


def _select(values, masks, sd):
    """Max of ``values`` with ties broken by cardinality, then lexicographic atom list."""
    best = values.max()
    tied = masks[values >= best - abs(best) * TIE_RTOL]
    winner = min((int(t) for t in tied), key=lambda t: sd.key(t))
    return float(best), winner


def _exhaustive_single(sd, objective):
    """Enumerate every nonempty subset mask of the support, chunked."""
    total = 1 << sd.n
    best_val, best_mask = -np.inf, None
    for start in range(1, total, _CHUNK):
        masks = np.arange(start, min(total, start + _CHUNK), dtype=np.uint32)
        vals = objective(masks)
        v, m = _select(vals, masks, sd)
        if best_mask is None or v > best_val + abs(best_val) * TIE_RTOL:
            best_val, best_mask = v, m
        elif v >= best_val - abs(best_val) * TIE_RTOL and sd.key(m) < sd.key(best_mask):
            best_mask = m
    return best_val, best_mask


def _carleson_objective(sd):
    gb = sd.group_bits()
    w = sd.count * (gb @ sd.masses) ** 2
    need = sd.need

    def objective(masks):
        inside = (need[None, :] & ~masks[:, None]) == 0
        return (inside @ w) / (sd.bits(masks) @ sd.masses)

    return objective


def _rec_objective(sd):
    M = sd.group_bits() * sd.masses  # (groups, n)

    def objective(masks):
        B = sd.bits(masks)
        return ((B @ M.T) ** 2 @ sd.count) / (B @ sd.masses)

    return objective


# -- local search ---------------------------------------------------------------


def _ancestor_fill_groups(mu, atoms):
    """For each support atom, the sets of support atoms below each of its ancestors."""
    g = mu.geometry
    rect_index = np.full(g.n_boundary, -1)
    rect_index[atoms] = np.arange(atoms.size)
    fills = []
    for b in atoms:
        node = g.boundary_node(int(b))
        groups = []
        for a in g.ancestors(node):
            unit = np.zeros(g.n_nodes, dtype=bool)
            unit[a] = True
            below = _below(g, unit)
            members = rect_index[below & (rect_index >= 0)]
            groups.append(np.array(sorted(members)))
        fills.append(groups)
    return fills


def _below(g, node_mask):
    """Boundary mask of points lying below any marked node."""
    from . import _sweeps

    m = node_mask.reshape(g.shape).copy()
    for axis, tree in enumerate(g.factors):
        _sweeps.down_any(m, tree.depth, axis)
    return boundary_of(g, m)


def _hill_climb(n_states, n_atoms, objective, fills, rng, restarts, start_states):
    """Maximize ``objective(state)`` over vectors in ``{0..n_states-1}^n_atoms``.

    Moves: set one coordinate to another value, or raise every atom under an
    ancestor of an active atom to the active atom's value.
    """
    best_val, best_state = -np.inf, None
    evals = 0
    for r in range(restarts):
        if r < len(start_states):
            state = np.array(start_states[r])
        else:
            state = rng.integers(0, n_states, n_atoms)
            if not state.any():
                state[rng.integers(n_atoms)] = n_states - 1
        cur = objective(state)
        evals += 1
        improved = True
        while improved:
            improved = False
            moves = []
            for i in range(n_atoms):
                for s in range(n_states):
                    if s != state[i]:
                        moves.append(("set", i, s))
            for i in np.flatnonzero(state):
                for grp in fills[i]:
                    moves.append(("fill", grp, state[i]))
            for j in rng.permutation(len(moves)):
                kind, a, s = moves[j]
                cand = state.copy()
                if kind == "set":
                    cand[a] = s
                else:
                    cand[a] = np.maximum(cand[a], s)
                    if np.array_equal(cand, state):
                        continue
                val = objective(cand)
                evals += 1
                if val is not None and (cur is None or val > cur * (1 + TIE_RTOL) + 1e-300):
                    state, cur, improved = cand, val, True
                    break
        if cur is not None and (best_state is None or cur > best_val):
            best_val, best_state = cur, state.copy()
    return best_val, best_state, evals


def _single_search(mu, strategy, ratio):
    atoms = np.flatnonzero(mu.masses > 0)
    g = mu.geometry
    zero = mu.masses == 0
    fills = _ancestor_fill_groups(mu, atoms)
    rng = np.random.default_rng(strategy.seed)

    def to_set(state):
        m = zero.copy()
        m[atoms[state > 0]] = True
        return BoundarySet(g, m)

    def objective(state):
        return ratio(mu, to_set(state))

    full = np.ones(atoms.size, dtype=int)
    val, state, evals = _hill_climb(2, atoms.size, objective, fills, rng, strategy.restarts, [full])
    return val, to_set(state), {"restarts": strategy.restarts, "evaluations": evals,
                                "seed": strategy.seed, "lower_bound": True}


# -- set constants ----------------------------------------------------------------


def _set_constant(kind, mu, strategy, objective_factory, ratio, with_zero):
    strategy = strategy or SearchStrategy()
    n = int((mu.masses > 0).sum())
    if n == 0:
        return ConstantReport(kind, 0.0, "exhaustive", (), {"support": 0})
    method = strategy.resolve(n, MAX_EXHAUSTIVE)
    if method == "exhaustive":
        sd = _SupportData.build(mu)
        val, mask = _exhaustive_single(sd, objective_factory(sd))
        E = sd.boundary_set(mu.geometry, mask, with_zero)
        meta = {"support": n, "candidates": (1 << n) - 1}
    else:
        val, E, meta = _single_search(mu, strategy, ratio)
        meta["support"] = n
        if not with_zero:
            E = E & mu.support()
    return ConstantReport(kind, float(val), method, tuple(int(i) for i in E.indices()), meta)


def carleson_constant(mu: BoundaryMeasure, strategy: SearchStrategy | None = None) -> ConstantReport:
    """``max_E E_E[mu] / mu(E)`` over boundary sets of positive measure."""
    return _set_constant("carleson", mu, strategy, _carleson_objective, local_energy_ratio, True)


def rec_constant(mu: BoundaryMeasure, strategy: SearchStrategy | None = None) -> ConstantReport:
    """``max_E E[mu|E] / mu(E)``; witness is reported as a subset of the support."""
    return _set_constant("rec", mu, strategy, _rec_objective, restricted_energy_ratio, False)


def _exhaustive_hereditary(sd):
    """All pairs with ``E subset F`` inside the support.

    Replacing ``E`` by ``E cap F`` changes neither the numerator (every
    rectangle in ``R_F`` lies inside ``U_F``) nor the denominator, so these
    ``3^n`` pairs cover the maximum over all ``4^n``.
    """
    n = sd.n
    gb = sd.group_bits()
    best_val, best_pair = -np.inf, None
    for fmask in range(1, 1 << n):
        in_f = [i for i in range(n) if fmask >> i & 1]
        k = len(in_f)
        groups = (sd.need & ~np.uint32(fmask)) == 0
        sub = np.arange(1, 1 << k, dtype=np.uint32)
        B = ((sub[:, None] >> np.arange(k, dtype=np.uint32)) & 1).astype(float)
        M = gb[groups][:, in_f] * sd.masses[in_f]  # (groups in R_F, k)
        num = (B @ M.T) ** 2 @ sd.count[groups]
        vals = num / (B @ sd.masses[in_f])
        top = vals.max()
        tied = np.flatnonzero(vals >= top - abs(top) * TIE_RTOL)
        emasks = []
        for t in tied:
            e = 0
            for j, i in enumerate(in_f):
                if sub[t] >> j & 1:
                    e |= 1 << i
            emasks.append(e)
        emask = min(emasks, key=lambda e: sd.key(e, fmask))
        top = float(top)
        if best_pair is None or top > best_val + abs(best_val) * TIE_RTOL:
            best_val, best_pair = top, (emask, fmask)
        elif top >= best_val - abs(best_val) * TIE_RTOL and sd.key(emask, fmask) < sd.key(*best_pair):
            best_pair = (emask, fmask)
    return best_val, best_pair


def hereditary_constant(mu: BoundaryMeasure, strategy: SearchStrategy | None = None) -> ConstantReport:
    """``max_{E,F} sum_{R in R_F} mu(R cap U_E)^2 / mu(E cap F)`` over pairs with ``mu(E cap F) > 0``."""
    strategy = strategy or SearchStrategy()
    g = mu.geometry
    n = int((mu.masses > 0).sum())
    if n == 0:
        return ConstantReport("hereditary", 0.0, "exhaustive", {"E": (), "F": ()}, {"support": 0})
    method = strategy.resolve(n, MAX_HEREDITARY_EXHAUSTIVE)
    if method == "exhaustive":
        sd = _SupportData.build(mu)
        val, (emask, fmask) = _exhaustive_hereditary(sd)
        E = sd.boundary_set(g, emask, with_zero=False)
        F = sd.boundary_set(g, fmask, with_zero=True)
        meta = {"support": n, "candidates": 3**n - 2**n}
    else:
        atoms = np.flatnonzero(mu.masses > 0)
        zero = mu.masses == 0
        fills = _ancestor_fill_groups(mu, atoms)
        rng = np.random.default_rng(strategy.seed)

        # state 0: outside F, 1: in F only, 2: in E and F
        def sets(state):
            e = np.zeros(g.n_boundary, dtype=bool)
            e[atoms[state == 2]] = True
            f = zero.copy()
            f[atoms[state > 0]] = True
            return BoundarySet(g, e), BoundarySet(g, f)

        def objective(state):
            return hereditary_ratio(mu, *sets(state))

        full = np.full(atoms.size, 2)
        val, state, evals = _hill_climb(3, atoms.size, objective, fills, rng, strategy.restarts, [full])
        E, F = sets(state)
        meta = {"support": n, "restarts": strategy.restarts, "evaluations": evals,
                "seed": strategy.seed, "lower_bound": True}
    witness = {"E": tuple(int(i) for i in E.indices()), "F": tuple(int(i) for i in F.indices())}
    return ConstantReport("hereditary", float(val), method, witness, meta)


# -- embedding ------------------------------------------------------------------


def embedding_constant(mu: BoundaryMeasure, tolerance: float = SPECTRAL_TOLERANCE,
                       max_iterations: int = MAX_POWER_ITERATIONS) -> ConstantReport:
    """Squared norm of ``psi -> I*(psi mu)`` from ``L^2(mu)``, by power iteration.

    Iterates the symmetric form ``u -> sqrt(m) V^{sqrt(m) u}`` on the support,
    which has the same spectrum; each step costs one pair of sweeps.  Stops
    when the Rayleigh quotient moves by less than ``tolerance`` (relative) on
    three consecutive steps.
    """
    if not tolerance > 0:
        raise GeometryError("tolerance must be positive")
    g = mu.geometry
    supp = mu.masses > 0
    if not supp.any():
        return ConstantReport("embedding", 0.0, "spectral", np.zeros(g.n_boundary), {"iterations": 0})
    root_m = np.sqrt(mu.masses)

    def apply(u):
        return root_m * boundary_of(g, potential_array(g, root_m * u))

    u = supp.astype(float)
    u /= np.linalg.norm(u)
    rq_prev, calm = None, 0
    for it in range(1, max_iterations + 1):
        w = apply(u)
        rq = float(u @ w)
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        u = w / norm
        if rq_prev is not None and abs(rq - rq_prev) <= tolerance * abs(rq):
            calm += 1
            if calm >= 3:
                break
        else:
            calm = 0
        rq_prev = rq
    else:
        raise ConvergenceError(
            f"power iteration did not converge in {max_iterations} steps",
            best=(rq, _psi(u, root_m)), iterations=max_iterations,
        )
    rq = float(u @ apply(u))
    return ConstantReport("embedding", rq, "spectral", _psi(u, root_m),
                          {"iterations": it, "tolerance": tolerance})


def _psi(u, root_m):
    psi = np.zeros_like(u)
    nz = root_m > 0
    psi[nz] = u[nz] / root_m[nz]
    s = np.max(np.abs(psi))
    return psi / s if s > 0 else psi


# -- ordering -------------------------------------------------------------------


@dataclass(frozen=True)
class OrderingReport:
    constants: dict
    checks: list
    ratios: dict

    @property
    def exhaustive(self):
        return all(r.method in ("exhaustive", "spectral") for r in self.constants.values())

    @property
    def violations(self):
        return [c for c in self.checks if not c["holds"]]

    @property
    def ok(self):
        return not self.violations

    def to_dict(self):
        return {
            "constants": {k: r.to_dict() for k, r in self.constants.items()},
            "checks": self.checks,
            "ratios": self.ratios,
            "exhaustive": self.exhaustive,
            "ok": self.ok,
        }


def _le(a, b):
    return a <= b + ORDER_RTOL * max(abs(a), abs(b), 1e-300)


def verify_witness(mu, report: ConstantReport):
    """Recompute a report's value from its witness; returns the recomputed value."""
    g = mu.geometry
    if report.kind == "box":
        if not report.witness:
            return 0.0
        rect = adjoint_array(g, mu.node_values()).reshape(-1)
        a = report.witness[0]
        return float(adjoint_array(g, rect**2).reshape(-1)[a] / rect[a])
    if report.kind == "embedding":
        v = embedding_ratio(mu, report.witness)
        return 0.0 if v is None else v
    if report.kind == "hereditary":
        if not report.witness["E"]:
            return 0.0
        E = BoundarySet.from_indices(g, report.witness["E"])
        F = BoundarySet.from_indices(g, report.witness["F"])
        return hereditary_ratio(mu, E, F)
    if not report.witness:
        return 0.0
    E = BoundarySet.from_indices(g, report.witness)
    ratio = local_energy_ratio if report.kind == "carleson" else restricted_energy_ratio
    return ratio(mu, E)


def ordering_report(mu: BoundaryMeasure, strategy: SearchStrategy | None = None,
                    tolerance: float = SPECTRAL_TOLERANCE) -> OrderingReport:
    """All five constants, their ratios and the unconditional orderings between them.

    The orderings are only claimed for exact values, so ``checks`` lists them
    as binding only when every set constant came from exhaustive enumeration.
    Witness re-evaluation is checked in every mode.
    """
    reports = {
        "box": box_constant(mu),
        "carleson": carleson_constant(mu, strategy),
        "rec": rec_constant(mu, strategy),
        "hereditary": hereditary_constant(mu, strategy),
        "embedding": embedding_constant(mu, tolerance),
    }
    exhaustive = all(r.method in ("exhaustive", "spectral") for r in reports.values())
    checks = []
    for a, b in (("box", "carleson"), ("carleson", "rec"), ("rec", "embedding"),
                 ("rec", "hereditary"), ("hereditary", "embedding")):
        va, vb = reports[a].value, reports[b].value
        checks.append({"name": f"{a} <= {b}", "lhs": va, "rhs": vb,
                       "holds": bool(_le(va, vb)) or not exhaustive, "binding": exhaustive})
    for kind, r in reports.items():
        tol = 1e-8 if kind == "embedding" else ORDER_RTOL
        try:
            v = verify_witness(mu, r)
        except DyadicError:
            v = None
        holds = v is not None and abs(v - r.value) <= tol * max(abs(r.value), 1e-300) + 1e-300
        checks.append({"name": f"{kind} witness", "lhs": r.value, "rhs": v, "holds": bool(holds),
                       "binding": True})
    ratios = {}
    for i, a in enumerate(KINDS):
        for b in KINDS[i + 1:]:
            if reports[a].value > 0:
                ratios[f"{b}/{a}"] = reports[b].value / reports[a].value
    return OrderingReport(reports, checks, ratios)


__all__ = [
    "ConstantReport",
    "OrderingReport",
    "SearchStrategy",
    "box_constant",
    "carleson_constant",
    "embedding_constant",
    "embedding_ratio",
    "hereditary_constant",
    "hereditary_ratio",
    "local_energy_ratio",
    "ordering_report",
    "rec_constant",
    "restricted_energy_ratio",
    "verify_witness",
]

"""Experiment drivers.

Each runner draws ``n_instances`` measures, instance ``i`` from the sub-seed
``sub_seed(spec.seed, i)``, so every row is reproducible from the report's
generator parameters and the row's own ``seed`` column.  Inequalities that
hold unconditionally are tallied as checks; quantities with unspecified
constants are only measured and summarized.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..constants import SearchStrategy, box_constant, embedding_constant, rec_constant
from ..constructive.peeling import peel_measure
from ..errors import GeometryError, SizeLimitError
from ..geometry import BoundarySet, TreeGeometry, restrict_measure, shadow_and_downset
from ..hardy import accurate_sum, adjoint_array, boundary_of, energy, hardy_array, measure_array, mutual_energy
from .generator import GeneratorSpec, gen_random_measure, sub_seed
from .report import Check, ExperimentReport, fit_loglog, holds_le, stats

DEFAULT_LAMBDAS = tuple(2.0 ** (k / 2) for k in range(-2, 11))
DEFAULT_DELTAS = tuple(2.0 ** -k for k in range(0, 13))
DEFAULT_INSTANCES = 20
REC_LIMIT = 16
C32_HEADROOM = 1.1
E_PROBABILITY = 0.75
F_THINNING = 0.5
# Keys separating the sampling stream of a trial from its measure stream.
_SAMPLING_KEY = 1 << 32


def _instances(spec: GeneratorSpec, n):
    for i in range(n):
        seed = sub_seed(spec.seed, i)
        yield i, seed, gen_random_measure(spec.with_seed(seed))


def _rect(mu):
    return adjoint_array(mu.geometry, mu.node_values())


def _boundary_potential(mu):
    g = mu.geometry
    return boundary_of(g, hardy_array(g, _rect(mu)))


def _rec_exhaustive(mu, limit):
    try:
        return rec_constant(mu, SearchStrategy.exhaustive(limit)).value
    except SizeLimitError:
        return None


def _params(spec, n_instances, **extra):
    return {"generator": spec.to_dict(), "n_instances": n_instances, **extra}


def _check_positive_grid(name, grid, upper=None):
    grid = tuple(float(x) for x in grid)
    if not grid:
        raise GeometryError(f"{name} grid is empty")
    for x in grid:
        if not x > 0 or (upper is not None and x > upper):
            bound = f"(0, {upper}]" if upper is not None else "(0, inf)"
            raise GeometryError(f"{name} = {x} outside {bound}")
    return tuple(sorted(set(grid)))


# -- mass decay -------------------------------------------------------------------


def run_mass_decay(spec: GeneratorSpec, lambdas=DEFAULT_LAMBDAS, n_instances=DEFAULT_INSTANCES,
                   rec_limit=REC_LIMIT) -> ExperimentReport:
    """``mu{V >= lam}`` against the Chebyshev bound ``E[mu]/lam``, with decay fits.

    Measures are forced to unit mass.  When the support is small enough for an
    exhaustive REC constant, the instance is also rescaled to REC constant 1
    and the decay of ``mu'{V^{mu'} >= lam}`` is fitted against the 7/3 law.
    """
    lambdas = _check_positive_grid("lambda", lambdas)
    spec = replace(spec, normalization="unit_mass")
    chebyshev = Check("chebyshev")
    rows, fits, rec_fits = [], [], []
    for i, seed, mu in _instances(spec, n_instances):
        V = _boundary_potential(mu)
        m = mu.masses
        E = accurate_sum(_rect(mu) ** 2)
        C_rec = _rec_exhaustive(mu, rec_limit)
        masses, rec_masses = [], []
        for lam in lambdas:
            mass = accurate_sum(m[V >= lam])
            bound = E / lam
            chebyshev.record(holds_le(mass, bound), instance=i, seed=seed, lam=lam)
            rec_mass = None
            if C_rec:
                # mu' = mu / C_rec has V' = V / C_rec.
                rec_mass = accurate_sum(m[V >= C_rec * lam]) / C_rec
            masses.append(mass)
            rec_masses.append(rec_mass)
            rows.append({"instance": i, "seed": seed, "lambda": lam, "mass": mass,
                         "chebyshev_bound": bound, "rec_constant": C_rec, "rec_mass": rec_mass})
        fits.append(fit_loglog(lambdas, masses))
        if C_rec:
            rec_fits.append(fit_loglog(lambdas, [x or 0.0 for x in rec_masses]))
    exps = [-f["slope"] for f in fits if f["slope"] is not None]
    rec_exps = [-f["slope"] for f in rec_fits if f["slope"] is not None]
    summary = {
        "decay_exponent": stats(exps),
        "rec_normalized_decay_exponent": stats(rec_exps),
        "reference_exponent": 7.0 / 3.0,
        "fits": fits,
        "rec_fits": rec_fits,
    }
    return ExperimentReport(
        "mass_decay", _params(spec, n_instances, lambdas=list(lambdas), rec_limit=rec_limit),
        ["instance", "seed", "lambda", "mass", "chebyshev_bound", "rec_constant", "rec_mass"],
        rows, summary, [chebyshev])


# -- mutual energy split ---------------------------------------------------------------


def sample_nested_sets(mu, rng, p_e=E_PROBABILITY, thin=F_THINNING):
    """``E`` keeps each support atom with probability ``p_e``; ``F`` keeps each atom of ``E`` with ``thin``."""
    supp = mu.masses > 0
    E = supp & (rng.random(supp.size) < p_e)
    F = E & (rng.random(supp.size) < thin)
    return BoundarySet(mu.geometry, E), BoundarySet(mu.geometry, F)


def mutual_split_observables(mu, E, F, C_rec=None):
    """Mutual energy of ``mu|E`` against ``mu|F`` beside its Cauchy-Schwarz and 3/7-4/7 scalings."""
    mutual = mutual_energy(mu, E, F)
    mE, mF = mu.mass_of(E), mu.mass_of(F)
    eE = energy(restrict_measure(mu, E)).total
    eF = energy(restrict_measure(mu, F)).total
    row = {"mutual": mutual, "mass_E": mE, "mass_F": mF, "energy_E": eE, "energy_F": eF,
           "cauchy_schwarz": math.sqrt(eE * eF), "rec_constant": C_rec,
           "trivial_bound": None, "split_ratio": None}
    if C_rec is not None:
        row["trivial_bound"] = C_rec * math.sqrt(mE * mF)
        if mE > 0 and mF > 0 and C_rec > 0:
            row["split_ratio"] = mutual / (C_rec * mE ** (3 / 7) * mF ** (4 / 7))
    return row


def run_mutual_energy_split(spec: GeneratorSpec, trials=DEFAULT_INSTANCES, rec_limit=REC_LIMIT,
                            p_e=E_PROBABILITY, thin=F_THINNING) -> ExperimentReport:
    """Nested random ``F ⊂ E``: the trivial bound is asserted, the 3/7-4/7 ratio measured.

    Asserted per trial: ``mutual <= (E[mu|E] E[mu|F])^{1/2}`` (Cauchy-Schwarz,
    always) and, when the REC constant is exhaustive, ``mutual <=
    C_REC (mu(E) mu(F))^{1/2}`` and the diagonal case ``E[mu|E] <= C_REC mu(E)``.
    """
    cs, trivial, diagonal = Check("cauchy_schwarz"), Check("trivial_bound"), Check("rec_diagonal")
    rows = []
    for i, seed, mu in _instances(spec, trials):
        rng = np.random.default_rng(sub_seed(seed, _SAMPLING_KEY))
        E, F = sample_nested_sets(mu, rng, p_e, thin)
        C_rec = _rec_exhaustive(mu, rec_limit)
        row = mutual_split_observables(mu, E, F, C_rec)
        cs.record(holds_le(row["mutual"], row["cauchy_schwarz"]), trial=i, seed=seed)
        if C_rec is not None:
            trivial.record(holds_le(row["mutual"], row["trivial_bound"]), trial=i, seed=seed)
            diagonal.record(holds_le(row["energy_E"], C_rec * row["mass_E"]), trial=i, seed=seed)
        rows.append({"trial": i, "seed": seed, "size_E": len(E), "size_F": len(F), **row})
    summary = {"split_ratio": stats(r["split_ratio"] for r in rows),
               "mutual_over_trivial": stats(
                   r["mutual"] / r["trivial_bound"] if r["trivial_bound"] else None for r in rows)}
    columns = ["trial", "seed", "size_E", "size_F", "mass_E", "mass_F", "energy_E", "energy_F",
               "mutual", "cauchy_schwarz", "rec_constant", "trivial_bound", "split_ratio"]
    params = _params(spec, trials, rec_limit=rec_limit, p_e=p_e, thin=thin)
    return ExperimentReport("mutual_energy_split", params, columns, rows, summary,
                            [cs, trivial, diagonal])


# -- truncation loss ----------------------------------------------------------------


def truncation_observables(mu, delta):
    """Truncated energy plus both sides of the level-set chain at threshold ``delta``.

    ``upper_sum`` is the energy over nodes with ``V >= delta`` (equal to
    ``E - E_delta``) and ``local_upper`` the local energy of the boundary set
    ``{V >= delta}``, which dominates it.
    """
    g = mu.geometry
    rect = _rect(mu)
    sq = rect**2
    Vn = hardy_array(g, rect)
    total = accurate_sum(sq)
    trunc = accurate_sum(sq[Vn < delta])
    upper = accurate_sum(sq[Vn >= delta])
    level = BoundarySet(g, boundary_of(g, Vn) >= delta)
    _, RE = shadow_and_downset(level)
    local = accurate_sum(sq[RE.grid])
    return {"energy": total, "truncated": trunc, "upper_sum": upper, "local_upper": local}


def run_truncation_loss(spec: GeneratorSpec, deltas=DEFAULT_DELTAS,
                        n_instances=DEFAULT_INSTANCES) -> ExperimentReport:
    """Ratios ``E_delta / (delta^{1/2} E)``; their maximum is the empirical constant ``C_emp``.

    Measures are forced to ``V >= 1`` on the support.  Asserted: ``E_delta``
    is nondecreasing in ``delta``; ``E - E_delta`` equals the energy above the
    level and is dominated by the local energy of ``{V >= delta}``; and the
    lower bound ``E - E_delta >= (1 - C_emp delta^{1/2}) E`` with the measured
    ``C_emp``.
    """
    deltas = _check_positive_grid("delta", deltas, upper=1.0)
    spec = replace(spec, normalization="potential_ge_one_on_support")
    monotone, identity, local_dom = Check("monotone_in_delta"), Check("upper_identity"), Check("local_dominates")
    rows = []
    for i, seed, mu in _instances(spec, n_instances):
        prev = -math.inf
        for d in deltas:
            obs = truncation_observables(mu, d)
            E, Et = obs["energy"], obs["truncated"]
            monotone.record(holds_le(prev, Et), instance=i, seed=seed, delta=d)
            prev = Et
            identity.record(abs(E - Et - obs["upper_sum"]) <= 1e-12 * E, instance=i, seed=seed, delta=d)
            local_dom.record(holds_le(obs["upper_sum"], obs["local_upper"]), instance=i, seed=seed, delta=d)
            ratio = Et / (math.sqrt(d) * E) if E > 0 else None
            rows.append({"instance": i, "seed": seed, "delta": d, **obs, "ratio": ratio})
    ratios = [r["ratio"] for r in rows]
    C_emp = stats(ratios)["max"]
    second = Check("second_display")
    for r in rows:
        if C_emp is not None:
            lhs = (1 - C_emp * math.sqrt(r["delta"])) * r["energy"]
            second.record(holds_le(lhs, r["energy"] - r["truncated"]), instance=r["instance"],
                          delta=r["delta"])
    by_delta = {}
    for d in deltas:
        by_delta[repr(d)] = stats(r["ratio"] for r in rows if r["delta"] == d)
    fit = fit_loglog([r["delta"] for r in rows], [r["truncated"] / r["energy"] for r in rows])
    summary = {"C_emp": C_emp, "ratio": stats(ratios), "ratio_by_delta": by_delta,
               "truncated_fraction_fit": fit, "reference_exponent": 0.5}
    columns = ["instance", "seed", "delta", "energy", "truncated", "upper_sum", "local_upper", "ratio"]
    return ExperimentReport("truncation_loss", _params(spec, n_instances, deltas=list(deltas)),
                            columns, rows, summary, [monotone, identity, local_dom, second])


# -- level-set capture --------------------------------------------------------------------


def level_set_capture(nu, C1, C32):
    """``E = {V^nu >= C1/(4 C32)}`` and the captured fraction ``E_E[nu] / E[nu]``."""
    g = nu.geometry
    rect = _rect(nu)
    sq = rect**2
    V = boundary_of(g, hardy_array(g, rect))
    threshold = C1 / (4 * C32)
    level = BoundarySet(g, V >= threshold)
    _, RE = shadow_and_downset(level)
    total = accurate_sum(sq)
    local = accurate_sum(sq[RE.grid])
    return level, threshold, total, local


def run_level_set_capture(spec: GeneratorSpec, C32=None, n_instances=DEFAULT_INSTANCES,
                          calibration_instances=DEFAULT_INSTANCES) -> ExperimentReport:
    """Peel each measure to ``V >= C/3`` on its support, then check ``E_E >= E/2``.

    ``C`` is the instance's own ratio ``E[mu]/|mu|``, so the peeling hypothesis
    holds with equality and ``C1 = C/3``.  Without an explicit ``C32`` the
    truncation experiment is run first on independent seeds and its ``C_emp``
    plus 10% headroom is used.
    """
    calibration = None
    if C32 is None:
        cal_spec = spec.with_seed(sub_seed(spec.seed, _SAMPLING_KEY))
        calibration = run_truncation_loss(cal_spec, n_instances=calibration_instances)
        C32 = calibration.summary["C_emp"] * C32_HEADROOM
    if not C32 > 0:
        raise GeometryError("C32 must be positive")
    capture, lower = Check("capture_half"), Check("potential_ge_C1_on_support")
    rows = []
    for i, seed, mu in _instances(spec, n_instances):
        C = energy(mu).total / mu.total
        peeled = peel_measure(mu, C)
        nu = peeled.residual
        C1 = C / 3
        Vs = _boundary_potential(nu)[nu.masses > 0]
        lower.record(bool(np.all(Vs >= C1 * (1 - 1e-12))), instance=i, seed=seed)
        level, threshold, total, local = level_set_capture(nu, C1, C32)
        frac = local / total if total > 0 else None
        capture.record(frac is not None and holds_le(0.5 * total, local), instance=i, seed=seed)
        rows.append({"instance": i, "seed": seed, "C": C, "C1": C1, "threshold": threshold,
                     "layers": len(peeled.layers), "support_kept": int((nu.masses > 0).sum()),
                     "level_set_size": len(level), "energy": total, "local_energy": local,
                     "capture": frac})
    summary = {"C32": C32, "capture": stats(r["capture"] for r in rows)}
    if calibration is not None:
        summary["calibration"] = {"C_emp": calibration.summary["C_emp"], "headroom": C32_HEADROOM,
                                  "instances": calibration_instances}
    columns = ["instance", "seed", "C", "C1", "threshold", "layers", "support_kept",
               "level_set_size", "energy", "local_energy", "capture"]
    return ExperimentReport("level_set_capture", _params(spec, n_instances, C32=C32), columns,
                            rows, summary, [lower, capture])


# -- REC to embedding ----------------------------------------------------------------------


def level_set_split(mu, psi):
    """Dyadic level split of ``||sum_k 2^k I*(mu|E_k)||^2`` for ``phi = I*(psi mu)``.

    ``E_k = {I phi >= 2^k}``.  Levels at or below ``k0 = floor(log2 min_supp I phi)``
    all have ``mu|E_k = mu``, so their geometric tail is summed in closed form.
    Returns the total, its diagonal part ``sum_k 4^k E[mu|E_k]``, the comparator
    ``sum_k 4^k mu(E_k)`` and the embedding side ``int (I phi)^2 dmu``.
    ``psi`` must be positive on the support (true for the extremal witness,
    whose potential is bounded below by its total mass).
    """
    g = mu.geometry
    m = mu.masses
    supp = m > 0
    if not supp.any():
        return None
    phi = adjoint_array(g, measure_array(g, psi * m))
    Iphi = boundary_of(g, hardy_array(g, phi))
    vals = Iphi[supp]
    if vals.min() <= 0:
        raise GeometryError("level split needs a witness positive on the support")
    k0 = math.floor(math.log2(vals.min()))
    k1 = math.floor(math.log2(vals.max()))
    rect = _rect(mu)
    # tail k <= k0: coefficients sum to 2^{k0+1}, their squares to 4^{k0+1}/3
    S = 2.0 ** (k0 + 1) * rect
    diag = 4.0 ** (k0 + 1) / 3 * accurate_sum(rect**2)
    comparator = 4.0 ** (k0 + 1) / 3 * accurate_sum(m)
    levels = []
    for k in range(k0 + 1, k1 + 1):
        Ek = supp & (Iphi >= 2.0**k)
        rk = adjoint_array(g, measure_array(g, np.where(Ek, m, 0.0)))
        ek = accurate_sum(rk**2)
        mk = accurate_sum(m[Ek])
        S += 2.0**k * rk
        diag += 4.0**k * ek
        comparator += 4.0**k * mk
        levels.append({"k": k, "mass": mk, "energy": ek})
    total = accurate_sum(S**2)
    return {"total": total, "diagonal": diag, "off_diagonal": total - diag, "comparator": comparator,
            "embedding_lhs": accurate_sum(Iphi**2 * m), "phi_norm_sq": accurate_sum(phi**2),
            "tail_level": k0, "levels": levels}


def run_rec_to_embedding(spec: GeneratorSpec, n_instances=DEFAULT_INSTANCES, rec_limit=REC_LIMIT,
                         tolerance=1e-10) -> ExperimentReport:
    """``C_embed / C_REC`` on small instances plus the level-set replay of the proof.

    The REC constant must be exhaustive (size-limit errors propagate).
    Asserted: ``C_REC <= C_embed`` and the diagonal bound
    ``sum_k 4^k E[mu|E_k] <= C_REC sum_k 4^k mu(E_k)``.
    """
    order, diag_check = Check("rec_le_embedding"), Check("diagonal_rec_bound")
    rows = []
    for i, seed, mu in _instances(spec, n_instances):
        C_rec = rec_constant(mu, SearchStrategy.exhaustive(rec_limit)).value
        emb = embedding_constant(mu, tolerance)
        row = {"instance": i, "seed": seed, "support": int((mu.masses > 0).sum()), "rec": C_rec,
               "embedding": emb.value, "ratio": None, "diagonal": None, "off_diagonal": None,
               "comparator": None, "off_over_diagonal": None}
        if C_rec > 0:
            row["ratio"] = emb.value / C_rec
            order.record(holds_le(C_rec, emb.value * (1 + 10 * tolerance)), instance=i, seed=seed)
            split = level_set_split(mu, np.asarray(emb.witness))
            if split is not None:
                row.update(diagonal=split["diagonal"], off_diagonal=split["off_diagonal"],
                           comparator=split["comparator"])
                if split["diagonal"] > 0:
                    row["off_over_diagonal"] = split["off_diagonal"] / split["diagonal"]
                diag_check.record(holds_le(split["diagonal"], C_rec * split["comparator"]),
                                  instance=i, seed=seed)
        rows.append(row)
    summary = {"ratio": stats(r["ratio"] for r in rows),
               "off_over_diagonal": stats(r["off_over_diagonal"] for r in rows),
               "skipped": sum(r["ratio"] is None for r in rows)}
    columns = ["instance", "seed", "support", "rec", "embedding", "ratio", "diagonal",
               "off_diagonal", "comparator", "off_over_diagonal"]
    return ExperimentReport("rec_to_embedding", _params(spec, n_instances, rec_limit=rec_limit),
                            columns, rows, summary, [order, diag_check])


# -- box decay ----------------------------------------------------------------------------


def _level_weights(tree):
    return np.repeat(np.arange(tree.depth + 1) + 1.0, 2 ** np.arange(tree.depth + 1))


def box_statistic(mu):
    """``max_R mu(R) (g(R)+1)`` on a tree, ``max_R mu(R) (g_x+1)(g_y+1)`` on a bi-tree; returns (value, node)."""
    g = mu.geometry
    if isinstance(g, TreeGeometry):
        w = _level_weights(g)
    else:
        w = np.outer(_level_weights(g.x), _level_weights(g.y))
    stat = (_rect(mu) * w).reshape(-1)
    node = int(np.argmax(stat))
    return float(stat[node]), node


def run_box_decay(spec: GeneratorSpec, n_instances=DEFAULT_INSTANCES) -> ExperimentReport:
    """Rescale each measure to box constant 1 and record the generation-weighted rectangle mass.

    Measurement only: no inequality is asserted.
    """
    rows = []
    for i, seed, mu in _instances(spec, n_instances):
        box = box_constant(mu).value
        nu = mu.scaled(1.0 / box) if box > 0 else mu
        stat, node = box_statistic(nu)
        rows.append({"instance": i, "seed": seed, "box_constant": box, "statistic": stat, "node": node})
    summary = {"C_prime": stats(r["statistic"] for r in rows)["max"],
               "statistic": stats(r["statistic"] for r in rows)}
    return ExperimentReport("box_decay", _params(spec, n_instances),
                            ["instance", "seed", "box_constant", "statistic", "node"], rows, summary, [])


EXPERIMENTS = {
    "mass_decay": run_mass_decay,
    "mutual_energy_split": run_mutual_energy_split,
    "truncation_loss": run_truncation_loss,
    "level_set_capture": run_level_set_capture,
    "rec_to_embedding": run_rec_to_embedding,
    "box_decay": run_box_decay,
}

import numpy as np
import pytest

import oracles
from dyadic_potential import (
    BoundaryMeasure,
    BoundarySet,
    GeometryError,
    PreconditionError,
    build_bitree,
    build_tree,
    potential,
)
from dyadic_potential.constructive import build_embedding_majorant, build_truncated_majorant
from instances import lp_extremal_measure


def _brute_Iphi_on(g, phi, F):
    depths = (g.x.depth, g.y.depth)
    I = oracles.brute_hardy(depths, phi.values)
    return I[[g.boundary_node(b) for b in F.indices()]]


def _lp_instances(depths, n_targets, seed):
    g = build_bitree(*depths)
    rng = np.random.default_rng(seed)
    for t in rng.choice(g.n_boundary, n_targets, replace=False):
        mu = lp_extremal_measure(g, int(t))
        Vb = potential(mu).boundary_values()
        lam = float(Vb.max()) * (1 - 1e-12)
        yield mu, BoundarySet(g, Vb >= lam), lam


def test_zero_measure_gives_zero_majorant():
    g = build_bitree(2)
    res = build_embedding_majorant(BoundaryMeasure.zeros(g), BoundarySet.empty(g), 9.0)
    assert not res.phi.values.any()
    assert res.norm_sq == 0 and res.norm_bound == 0


def test_empty_F_still_certifies_the_norm():
    g = build_bitree(2)
    mu = BoundaryMeasure.uniform(g, 1.0)
    mu = mu.scaled(1 / potential(mu).boundary_values().max())
    res = build_embedding_majorant(mu, BoundarySet.empty(g), 9.0)
    assert not res.phi.values.any()
    assert res.norm_bound == pytest.approx(8 / 3 * oracles.energy((2, 2), mu.masses))
    assert res.norm_sq <= res.norm_bound


def test_lambda_below_gate_is_rejected():
    g = build_bitree(2)
    with pytest.raises(PreconditionError) as err:
        build_embedding_majorant(BoundaryMeasure.zeros(g), BoundarySet.empty(g), 5.0)
    assert err.value.condition == "lambda_gate"


def test_relaxed_gate_needs_theta_lambda_above_one():
    g = build_bitree(2)
    with pytest.raises(PreconditionError):
        build_embedding_majorant(BoundaryMeasure.zeros(g), BoundarySet.empty(g), 1.0,
                                 theta=0.9, enforce_gate=False)
    with pytest.raises(GeometryError):
        build_embedding_majorant(BoundaryMeasure.zeros(g), BoundarySet.empty(g), 9.0, theta=1.0)


def test_tree_measure_is_rejected():
    tree = build_tree(2)
    with pytest.raises(GeometryError):
        build_embedding_majorant(BoundaryMeasure.zeros(tree), BoundarySet.empty(tree), 9.0)


def test_potential_above_one_on_support_is_rejected():
    g = build_bitree(1)
    mu = BoundaryMeasure.atom(g, 0, 1.0)  # V = 4 at the atom
    with pytest.raises(PreconditionError) as err:
        build_embedding_majorant(mu, BoundarySet.empty(g), 9.0)
    assert err.value.condition == "V_le_1_on_support"
    assert err.value.node == 0


def test_F_outside_the_level_set_is_rejected():
    g = build_bitree(2)
    mu = BoundaryMeasure.atom(g, 0, 1 / 9)  # V = 1 at the atom
    with pytest.raises(PreconditionError) as err:
        build_embedding_majorant(mu, BoundarySet.from_indices(g, [5]), 9.0)
    assert err.value.condition == "V_ge_lambda_on_F"
    assert err.value.node == 5


@pytest.mark.parametrize("depths, seed", [((2, 2), 0), ((2, 3), 1), ((3, 3), 2)])
def test_relaxed_lp_instances_meet_both_certificates(depths, seed):
    theta = 0.97
    for mu, F, lam in _lp_instances(depths, 3, seed):
        assert theta * lam > 1
        res = build_embedding_majorant(mu, F, lam, theta=theta, enforce_gate=False)
        g = mu.geometry
        Iphi = _brute_Iphi_on(g, res.phi, F)
        assert Iphi.min() >= res.lower_bound * (1 - 1e-12)
        assert res.lower_bound > 0
        E = oracles.energy(depths, mu.masses)
        assert res.norm_bound == pytest.approx(8 / (theta * lam) * E)
        assert res.norm_sq <= res.norm_bound
        assert float(np.sum(res.phi.values**2)) == pytest.approx(res.norm_sq)
        for sl in res.meta["slices"].values():
            assert set(sl["F"]) <= set(range(g.x.n_boundary))


def test_rescale_makes_the_lower_bound_lambda():
    mu, F, lam = next(_lp_instances((2, 2), 1, 3))
    plain = build_embedding_majorant(mu, F, lam, theta=0.97, enforce_gate=False)
    scaled = build_embedding_majorant(mu, F, lam, theta=0.97, enforce_gate=False, rescale=True)
    c = lam / plain.lower_bound
    np.testing.assert_allclose(scaled.phi.values, plain.phi.values * c)
    assert scaled.lower_bound == pytest.approx(lam)
    assert scaled.norm_bound == pytest.approx(plain.norm_bound * c**2)
    assert _brute_Iphi_on(mu.geometry, scaled.phi, F).min() >= lam * (1 - 1e-12)


# -- truncated potentials -------------------------------------------------------------


def _truncated_energy(depths, masses, delta):
    rm = oracles.rect_masses(depths, masses)
    V = oracles.brute_hardy(depths, rm)
    return float(np.sum(np.where(V < delta, rm, 0.0) ** 2))


def test_truncated_with_no_small_rectangles_gives_zero():
    g = build_bitree(2)
    mu = BoundaryMeasure.uniform(g, 100.0)
    res = build_truncated_majorant(mu, BoundarySet.empty(g), 9.0, 0.5)
    assert res.meta["E1_empty"]
    assert not res.phi.values.any()


def test_truncated_argument_checks():
    g = build_bitree(1)
    mu = BoundaryMeasure.zeros(g)
    with pytest.raises(GeometryError):
        build_truncated_majorant(mu, BoundarySet.empty(g), 9.0, 0.0)
    with pytest.raises(GeometryError):
        build_truncated_majorant(mu, BoundarySet.empty(g), 9.0, 1.5)
    with pytest.raises(PreconditionError) as err:
        build_truncated_majorant(mu, BoundarySet.empty(g), 0.5, 0.5)
    assert err.value.condition == "lambda_ge_1"
    with pytest.raises(PreconditionError) as err:
        build_truncated_majorant(mu, BoundarySet.full(g), 9.0, 0.5)
    assert err.value.condition == "V_delta_ge_lambda_on_F"


@pytest.mark.parametrize("depths", [(1, 1), (2, 2), (2, 3)])
def test_truncated_relaxed_instances_meet_both_certificates(depths):
    g = build_bitree(*depths)
    rng = np.random.default_rng(sum(depths))
    theta, done = 0.9, 0
    for _ in range(40):
        m = np.where(rng.random(g.n_boundary) < rng.uniform(0.05, 1), rng.exponential(size=g.n_boundary), 0.0)
        if not m.any():
            continue
        delta = float(rng.choice([1.0, 0.8, 0.7]))
        best = max((potential(BoundaryMeasure(g, m * s), delta).boundary_values().max(), s)
                   for s in np.geomspace(0.01, 10, 40))
        if best[0] < 1.02:
            continue
        mu = BoundaryMeasure(g, m * best[1])
        Vd = potential(mu, delta).boundary_values()
        lam = float(Vd.max()) * (1 - 1e-12)
        if theta * lam / delta <= 1.01:
            continue
        F = BoundarySet(g, Vd >= lam)
        res = build_truncated_majorant(mu, F, lam, delta, theta=theta, enforce_gate=False)
        Iphi = _brute_Iphi_on(g, res.phi, F)
        assert Iphi.min() >= res.lower_bound * (1 - 1e-9)
        Ed = _truncated_energy(depths, mu.masses, delta)
        assert res.meta["energy_delta"] == pytest.approx(Ed, rel=1e-12, abs=1e-15)
        assert res.norm_sq <= 8 * delta / (theta * lam) * Ed * (1 + 1e-6) + 1e-300
        done += 1
    assert done > 0

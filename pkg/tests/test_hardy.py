import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import sparse_masses
from dyadic_potential import (
    BoundaryMeasure,
    BoundarySet,
    GeometryError,
    NodeFunction,
    SizeLimitError,
    adjoint_sum,
    boundary_kernel,
    build_bitree,
    build_tree,
    energy,
    energy_by_integration,
    hardy_sum,
    kernel_matrix,
    mutual_energy,
    potential,
    truncation_set,
)
from dyadic_potential.hardy import FSUM_THRESHOLD, accurate_sum


def geometry_of(depths):
    return build_tree(depths[0]) if len(depths) == 1 else build_bitree(*depths)


GEOMETRIES = [(0,), (1,), (3,), (1, 1), (1, 2), (2, 2)]


@pytest.mark.parametrize("depths", GEOMETRIES)
def test_operators_match_brute_force(depths):
    g = geometry_of(depths)
    f = np.random.default_rng(len(depths) * 10 + depths[0]).normal(size=g.n_nodes)
    F = NodeFunction(g, f)
    np.testing.assert_allclose(hardy_sum(F).values, oracles.brute_hardy(depths, f), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(adjoint_sum(F).values, oracles.brute_adjoint(depths, f), rtol=1e-12,
                               atol=1e-12)


@pytest.mark.parametrize("depths", GEOMETRIES)
def test_potential_and_energy_match_brute_force(depths):
    g = geometry_of(depths)
    m = sparse_masses(np.random.default_rng(7), g.n_boundary)
    mu = BoundaryMeasure(g, m)
    np.testing.assert_allclose(potential(mu).boundary_values(), oracles.brute_potential(depths, m),
                               rtol=1e-12)
    np.testing.assert_allclose(adjoint_sum(mu).values, oracles.rect_masses(depths, m), rtol=1e-12)
    assert energy(mu).total == pytest.approx(oracles.energy(depths, m), rel=1e-12)
    assert energy_by_integration(mu) == pytest.approx(energy(mu).total, rel=1e-12)
    np.testing.assert_array_equal(kernel_matrix(g), oracles.brute_kernel(depths))


def test_uniform_depth_one_bitree():
    mu = BoundaryMeasure.uniform(build_bitree(1))
    rect = adjoint_sum(mu).grid
    assert rect[0, 0] == 1.0 and rect[1, 0] == 0.5 and rect[1, 1] == 0.25
    np.testing.assert_allclose(potential(mu).boundary_values(), 2.25)
    assert energy(mu).total == pytest.approx(2.25)


def test_uniform_tree_leaf_potential():
    # depth 3, unit mass: 1 + 1/2 + 1/4 + 1/8
    mu = BoundaryMeasure.uniform(build_tree(3))
    np.testing.assert_allclose(potential(mu).boundary_values(), 1.875)


def test_atom_potential_is_column_count():
    g = build_bitree(2, 1)
    mu = BoundaryMeasure.atom(g, 5, 2.0)
    assert potential(mu).boundary_values()[5] == pytest.approx(3 * 2 * 2.0)


@given(st.integers(0, 3), st.integers(0, 2), st.integers(0, 2**32 - 1))
def test_adjointness(dx, dy, seed):
    g = build_bitree(dx, dy)
    rng = np.random.default_rng(seed)
    f, psi = rng.normal(size=g.n_nodes), rng.normal(size=g.n_nodes)
    lhs = np.dot(f, adjoint_sum(NodeFunction(g, psi)).values)
    rhs = np.dot(hardy_sum(NodeFunction(g, f)).values, psi)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


@given(st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_potential_is_kernel_sum(depth, seed):
    g = build_tree(depth)
    m = sparse_masses(np.random.default_rng(seed), g.n_boundary)
    V = potential(BoundaryMeasure(g, m)).boundary_values()
    w = int(np.random.default_rng(seed + 1).integers(g.n_boundary))
    expected = sum(boundary_kernel(g, w, v) * m[v] for v in range(g.n_boundary))
    assert V[w] == pytest.approx(expected, rel=1e-12)


def test_kernel_values():
    t = build_tree(3)
    assert boundary_kernel(t, 0, 0) == 4 and boundary_kernel(t, 0, 1) == 3 and boundary_kernel(t, 0, 7) == 1
    g = build_bitree(1)
    assert boundary_kernel(g, 0, 3) == 1 and boundary_kernel(g, 0, 1) == 2
    with pytest.raises(GeometryError):
        boundary_kernel(t, 0, 8)
    with pytest.raises(SizeLimitError):
        kernel_matrix(build_tree(6), max_size=10)


def test_local_and_restricted_energy():
    depths = (1, 2)
    g = geometry_of(depths)
    m = np.array([0.7, 0, 0, 0.1, 0.5, 0.2, 0, 0])
    mu = BoundaryMeasure(g, m)
    E = BoundarySet.from_indices(g, [0, 3, 4])
    rep = energy(mu, E, restricted=True)
    assert rep.local == pytest.approx(oracles.local_energy(depths, m, [0, 3, 4]), rel=1e-12)
    assert rep.restricted == pytest.approx(oracles.energy(depths, oracles.restrict(m, [0, 3, 4])), rel=1e-12)
    full = energy(mu, BoundarySet.full(g))
    assert full.local == pytest.approx(full.total)
    assert set(rep.to_dict()) == {"total", "local", "restricted", "truncated"}
    with pytest.raises(GeometryError):
        energy(mu, restricted=True)


def test_mutual_energy_examples():
    g = build_bitree(1)
    mu = BoundaryMeasure.uniform(g)
    full, one = BoundarySet.full(g), BoundarySet.from_indices(g, [0])
    assert mutual_energy(mu, full, one) == pytest.approx(9 / 16)
    assert mutual_energy(mu, full, BoundarySet.empty(g)) == 0.0
    assert mutual_energy(mu, full, full) == pytest.approx(energy(mu).total)


def brute_truncated(g, m, delta):
    rect = adjoint_sum(BoundaryMeasure(g, m)).values
    V = hardy_sum(NodeFunction(g, rect)).values
    total = 0.0
    for a in range(g.n_nodes):
        if V[a] < delta:
            total += rect[a] ** 2
    return total, V


@given(st.integers(1, 3), st.floats(0.01, 1.0), st.integers(0, 2**32 - 1))
def test_truncated_energy_and_potential(depth, delta, seed):
    g = build_bitree(depth, 1)
    m = sparse_masses(np.random.default_rng(seed), g.n_boundary, scale=0.2)
    mu = BoundaryMeasure(g, m)
    expected, V = brute_truncated(g, m, delta)
    assert energy(mu, delta=delta).truncated == pytest.approx(expected, rel=1e-12, abs=1e-300)
    Ed = truncation_set(mu, delta)
    np.testing.assert_array_equal(Ed.mask, V < delta)
    Vd = potential(mu, delta)
    assert Vd.provenance.startswith("truncated")
    # V_delta integrates to the truncated energy
    assert float(np.dot(Vd.boundary_values(), m)) == pytest.approx(expected, rel=1e-10, abs=1e-14)
    assert np.all(Vd.boundary_values() <= potential(mu).boundary_values() * (1 + 1e-12))


def test_truncation_extremes():
    g = build_bitree(1)
    mu = BoundaryMeasure.uniform(g, total=4.0)  # every V >= 4
    assert energy(mu, delta=1.0).truncated == 0.0
    np.testing.assert_array_equal(potential(mu, 1.0).values, 0.0)
    for bad in (0.0, -1.0, 1.5):
        with pytest.raises(GeometryError):
            energy(mu, delta=bad)


def test_accurate_sum_switches_to_fsum():
    vals = np.full(FSUM_THRESHOLD + 2, 0.1)
    vals[0] = 1e16
    vals[1] = -1e16
    assert accurate_sum(vals) == pytest.approx(0.1 * FSUM_THRESHOLD, rel=1e-15)
    assert accurate_sum([1.0, 2.0]) == 3.0

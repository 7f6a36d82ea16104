import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pecshadows import measurement, states, tensor, typedist
from pecshadows.errors import ContractViolation, DimensionOverflowError, SpectrumOrderError


def basis_and_projs(d, rng):
    u = tensor.haar_unitary(d, rng)
    return u, [np.outer(u[:, i], u[:, i].conj()) for i in range(d)]


def brute_marginal(e, basis, k):
    sig = typedist.sigma_state(e, basis)
    n, d = int(sum(e)), basis.shape[0]
    m = tensor.sym_partial_trace(sig, n, k, d)
    return m / np.trace(m).real


def test_enumerate_types_examples():
    assert typedist.enumerate_types(2, 2).tolist() == [[2, 0], [1, 1], [0, 2]]
    assert len(typedist.enumerate_types(3, 4)) == 15 == tensor.sym_dim(3, 4)
    assert sorted(map(tuple, typedist.enumerate_types(4, 1))) == sorted(map(tuple, np.eye(4, dtype=int)))


@given(st.integers(1, 4), st.integers(0, 6))
@settings(max_examples=30, deadline=None)
def test_enumerate_types_are_distinct_compositions(d, n):
    types = typedist.enumerate_types(d, n)
    assert len({tuple(t) for t in types}) == len(types) == tensor.sym_dim(d, n)
    assert np.all(types.sum(axis=1) == n) and np.all(types >= 0)


def test_enumeration_cap():
    with pytest.raises(DimensionOverflowError):
        typedist.enumerate_types(10, 10, cap=1000)


def test_sigma_of_pure_type(rng):
    u, projs = basis_and_projs(2, rng)
    assert np.allclose(typedist.sigma_state((3, 0), u), tensor.kron_power(projs[0], 3))


@pytest.mark.parametrize("d,n", [(2, 2), (2, 3), (3, 2), (3, 3)])
def test_mixture_identity(d, n, rng):
    rho = states.random_spectral_state(d, rng)
    total = sum(typedist.multinomial(e) * np.prod(rho.eigenvalues ** e) * typedist.sigma_state(e, rho.eigenvectors)
                for e in typedist.enumerate_types(d, n))
    assert np.max(np.abs(total - tensor.kron_power(rho.matrix, n))) <= 1e-10


def test_sigma_is_exchangeable(rng):
    u, _ = basis_and_projs(2, rng)
    for e in typedist.enumerate_types(2, 4):
        assert tensor.exchangeability_defect(typedist.sigma_state(e, u), 4, 2) < 1e-12


def test_z_of_type_values(rng):
    assert typedist.z_of_type((4, 0, 0)) == 1
    assert typedist.z_of_type((1, 1)) == 0.5
    assert np.isclose(typedist.z_of_type((2, 1)), 1 / 3)
    u, _ = basis_and_projs(2, rng)
    p3 = tensor.sym_projector(2, 3)
    assert np.isclose(np.trace(p3 @ typedist.sigma_state((2, 1), u)).real, 1 / 3)


@pytest.mark.parametrize("d,n", [(2, 2), (2, 4), (3, 3), (3, 4)])
def test_closed_forms_match_brute_force(d, n, rng):
    u, _ = basis_and_projs(d, rng)
    proj = tensor.sym_projector(d, n)
    for e in typedist.enumerate_types(d, n):
        sig = typedist.sigma_state(e, u)
        assert abs(np.trace(proj @ sig).real - typedist.z_of_type(e)) <= 1e-10
        assert np.max(np.abs(brute_marginal(e, u, 1) - typedist.m1_of_type(e, u))) <= 1e-10
        assert np.max(np.abs(brute_marginal(e, u, 2) - typedist.m2_of_type(e, u))) <= 1e-10


def test_m1_examples(rng):
    u, projs = basis_and_projs(3, rng)
    assert np.allclose(typedist.m1_of_type((5, 0, 0), u), projs[0])
    assert np.allclose(typedist.m1_of_type((1, 1, 0), u), (projs[0] + projs[1]) / 2)


def test_m2_examples(rng):
    u, projs = basis_and_projs(2, rng)
    assert np.allclose(typedist.m2_of_type((3, 0), u), np.kron(projs[0], projs[0]))
    m = typedist.m2_of_type((1, 1), u)
    expected = tensor.sym_projector(2, 2) @ (np.kron(projs[0], projs[1]) + np.kron(projs[1], projs[0]))
    assert np.allclose(m, expected)
    swap = tensor.permutation_operator((1, 0), 2)
    assert np.isclose(np.trace(m), 1) and np.allclose(swap @ m @ swap, m)
    with pytest.raises(ContractViolation):
        typedist.m2_of_type((1, 0), u)


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 6))
@settings(max_examples=30, deadline=None)
def test_type_marginals_are_unit_trace(seed, d, n):
    rng = np.random.default_rng(seed)
    u = tensor.haar_unitary(d, rng)
    e = rng.multinomial(n, np.ones(d) / d)
    assert np.isclose(np.trace(typedist.m1_of_type(e, u)).real, 1)
    assert np.isclose(np.trace(typedist.m2_of_type(e, u)).real, 1)


@pytest.mark.parametrize("d,n", [(2, 4), (3, 3), (3, 4)])
def test_marginals_are_type_averages(d, n, rng):
    s = states.random_spectral_state(d, rng, (0.55, 0.95))
    dist = typedist.exact_dist(s.eigenvalues, n)
    m1 = sum(m * typedist.m1_of_type(e, s.eigenvectors) for e, m in zip(dist.types, dist.masses))
    m2 = sum(m * typedist.m2_of_type(e, s.eigenvectors) for e, m in zip(dist.types, dist.masses))
    assert np.max(np.abs(m1 - measurement.m_k_exact(s, n, 1, "brute"))) <= 1e-9
    assert np.max(np.abs(m2 - measurement.m_k_exact(s, n, 2, "brute"))) <= 1e-9


def test_exact_dist_examples():
    d = typedist.exact_dist([1.0, 0.0, 0.0], 3)
    assert d.lookup()[(3, 0, 0)] == 1 and np.isclose(d.masses.sum(), 1)
    d = typedist.exact_dist([0.8, 0.2], 2)
    assert np.allclose(d.masses, np.array([0.64, 0.16, 0.04]) / 0.84)


def test_geometric_moments_match_closed_form():
    lam = np.array([0.7, 0.2, 0.1])
    mean, cov = typedist.geometric_moments(lam, 6)
    l1 = lam[0]
    assert np.allclose(mean[1:], lam[1:] / (l1 - lam[1:]))
    assert np.allclose(np.diag(cov)[1:], lam[1:] * l1 / (l1 - lam[1:]) ** 2)
    geo = typedist.geom_dist(lam, 6)
    assert np.allclose(geo.mean()[1:], mean[1:], atol=1e-10)
    assert np.allclose(geo.covariance()[1:, 1:], cov[1:, 1:], atol=1e-9)


def test_zero_eigenvalue_coordinate_is_zero():
    geo = typedist.geom_dist([0.8, 0.2, 0.0], 4)
    assert np.all(geo.types[:, 2] == 0)


def test_geometric_needs_gap():
    with pytest.raises(SpectrumOrderError):
        typedist.geom_dist([0.5, 0.5], 3)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("n", range(2, 7))
def test_geometric_conditioned_equals_exact(d, n, rng):
    s = states.random_spectral_state(d, rng, (0.55, 0.95))
    exact = typedist.exact_dist(s.eigenvalues, n).lookup()
    cond = typedist.geom_dist(s.eigenvalues, n).conditioned_on_support().lookup()
    assert exact.keys() == cond.keys()
    assert max(abs(exact[k] - cond[k]) for k in exact) <= 1e-10


def test_delta_examples():
    assert typedist.delta_bound(1.0, 5) == 0
    val = typedist.delta_bound(0.9, 10)
    assert np.isclose(val, (1 / 9) ** 11 * 0.9 / 0.8)
    assert abs(val / 3.59e-11 - 1) < 5e-3
    lam = [0.9, 0.1]
    assert typedist.prob_e1_negative(lam, 10) <= val


def test_delta_curve_monotone():
    etas = np.linspace(0.02, 0.4, 200)
    deltas = [r["delta"] for r in typedist.delta_curve(etas)]
    assert np.all(np.diff(deltas) > 0)


def test_tv_examples():
    lam = [0.9, 0.1]
    exact, geo = typedist.exact_dist(lam, 5), typedist.geom_dist(lam, 5)
    assert typedist.tv_distance(exact, exact) == 0
    tv = typedist.tv_distance(exact, geo)
    tail = sum(0.1 ** j / 0.9 ** j * (1 - 0.1 / 0.9) for j in range(6, 400))
    assert abs(tv - tail) <= 1e-12 + geo.truncation_error
    assert tv <= typedist.delta_bound(0.9, 5)


def test_tv_decreases_in_n():
    lam = [0.75, 0.15, 0.1]
    tvs = [typedist.tv_distance(typedist.exact_dist(lam, n), typedist.geom_dist(lam, n)) for n in range(2, 9)]
    assert np.all(np.diff(tvs) < 0)


def test_prob_negative_tail_bound():
    lam = np.array([0.7, 0.2, 0.1])
    pmf = typedist.tail_count_pmf(lam, 20)
    assert np.all(pmf <= ((1 - 0.7) / 0.7) ** np.arange(21) + 1e-15)


def test_mean_gap_examples():
    assert typedist.mean_gap_bound([1.0, 0.0], 5) == 0
    assert typedist.mean_gap([0.9, 0.1], 5) <= typedist.mean_gap_bound([0.9, 0.1], 5)
    bounds = [typedist.mean_gap_bound([0.8, 0.2], n) for n in (10, 50, 200)]
    assert typedist.mean_gap_bound([0.55, 0.45], 2) == float("inf")
    assert bounds[0] > bounds[1] > bounds[2] and bounds[2] < 1e-100


@pytest.mark.parametrize("lam,n", [([1.0, 0.0], 4), ([0.8, 0.2], 4), ([0.7, 0.2, 0.1], 4)])
def test_covariance_check(lam, n):
    res = typedist.covariance_check(lam, n)
    assert res.ok
    if lam[0] == 1.0:
        assert np.allclose(res.cov_exact, 0) and np.allclose(res.cov_geometric, 0)


def test_mixture_and_cross_term_bounds(rng):
    for _ in range(10):
        s = states.random_spectral_state(3, rng, (0.6, 0.95))
        o = states.random_observable(3, rng.uniform(1, 3), rng)
        for n in (3, 5, 8):
            assert typedist.mixture_variance(s.eigenvalues, s.eigenvectors, o.matrix, n) <= \
                typedist.mixture_variance_bound(s.lambda1, o.infinity_norm, n)
            assert typedist.cross_term(s.eigenvalues, s.eigenvectors, o.matrix, n) <= \
                typedist.cross_term_bound(s.lambda1, o.infinity_norm, n)


def test_distribution_csv(tmp_path):
    lam = [0.8, 0.2]
    path = tmp_path / "dist.csv"
    typedist.write_distribution_csv(path, typedist.exact_dist(lam, 3), typedist.geom_dist(lam, 3))
    lines = path.read_text().splitlines()
    assert lines[0] == "e_1,e_2,mass_exact,mass_geometric"
    assert len(lines) > 5

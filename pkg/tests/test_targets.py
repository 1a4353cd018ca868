import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdbcd.criteria import CriterionId, inferential_efficiency
from rdbcd.design import DesignSpace, DomainError
from rdbcd.targets import (SolverError, bandyopadhyay_biswas_target, compound_objective,
                           compound_system_residual, compound_target, constant_weight_target,
                           constrained_target, ethical_target, solve_compound_batch)
from rdbcd.weights import chi_square_cdf, constant, s_shaped

from .conftest import BINARY, NONUNIFORM, UNIFORM, allocations, distributions, spaces, thetas

ALL = list(CriterionId)


@st.composite
def scenarios(draw, nonzero=True):
    space = draw(spaces(2))
    K = space.n_strata
    theta = draw(thetas(K))
    if nonzero:
        theta = np.where(np.abs(theta) < 0.05, 0.05 + np.abs(theta), theta)
    p = draw(distributions(K))
    omega = draw(st.floats(0.05, 0.95))
    return space, theta, p, omega


def test_spec_example_c4():
    theta = np.array([-4.0, -5.0, -1.0, 1.0])
    res = compound_target("C4", BINARY, theta, NONUNIFORM, s_shaped(2))
    np.testing.assert_allclose(res.pi_star, [0.328, 0.179, 0.282, 0.541], atol=5e-4)
    assert res.gradient_residual <= 1e-10


def test_zero_weight_is_balanced():
    res = compound_target("C1", BINARY, np.array([1.0, 2, 2, 4]), UNIFORM, constant(0.0))
    np.testing.assert_allclose(res.pi_star, 0.5, atol=1e-12)


def test_degenerate_zero_effects():
    res = compound_target("C3", BINARY, np.zeros(4), UNIFORM, s_shaped(1))
    assert res.degenerate and res.efficiencies.psi_E is None
    np.testing.assert_array_equal(res.pi_star, 0.5)


def test_zero_theta_stratum_gets_half():
    res = compound_target("C3", BINARY, np.array([2.0, 0.0, -1.0, 3.0]), NONUNIFORM,
                          chi_square_cdf(1))
    assert res.pi_star[1] == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("crit", ALL)
def test_gradient_and_hessian_by_finite_differences(crit):
    rng = np.random.default_rng(5)
    space = DesignSpace(2, 1)
    K = space.n_strata
    for _ in range(5):
        pi = rng.uniform(0.2, 0.8, K)
        theta = rng.normal(0, 2, K)
        p = rng.dirichlet(np.ones(K))
        _, g, H = compound_objective(crit, space, pi, theta, p, 0.6)
        h = 1e-6
        for k in range(K):
            e = np.zeros(K)
            e[k] = h
            fp, gp, _ = compound_objective(crit, space, pi + e, theta, p, 0.6)
            fm, gm, _ = compound_objective(crit, space, pi - e, theta, p, 0.6)
            assert (fp - fm) / (2 * h) == pytest.approx(g[k], rel=1e-6, abs=1e-8)
            np.testing.assert_allclose((gp - gm) / (2 * h), H[:, k], rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("crit", ALL)
@given(sc=scenarios())
def test_first_order_system_holds(crit, sc):
    space, theta, p, omega = sc
    pi = constant_weight_target(crit, space, theta, p, omega)
    res = compound_system_residual(crit, space, pi, theta, p, omega)
    assert np.max(np.abs(res)) <= 1e-9


@pytest.mark.parametrize("crit", ALL)
@given(sc=scenarios())
def test_side_of_half_and_symmetry(crit, sc):
    space, theta, p, omega = sc
    pi = constant_weight_target(crit, space, theta, p, omega)
    assert np.all(np.sign(pi - 0.5) == np.sign(theta))
    mirrored = constant_weight_target(crit, space, -theta, p, omega)
    np.testing.assert_allclose(pi, 1 - mirrored, atol=1e-8)
    assert np.all((pi > 0) & (pi < 1))


@pytest.mark.parametrize("crit", ALL)
@given(sc=scenarios(), data=st.data())
def test_monotone_in_theta(crit, sc, data):
    space, theta, p, omega = sc
    k = data.draw(st.integers(0, space.n_strata - 1))
    base = constant_weight_target(crit, space, theta, p, omega)
    bumped = theta.copy()
    bumped[k] += data.draw(st.floats(0.05, 2.0))
    assert constant_weight_target(crit, space, bumped, p, omega)[k] >= base[k] - 1e-12


@pytest.mark.parametrize("crit", ALL)
@given(sc=scenarios(), data=st.data())
def test_monotone_in_p(crit, sc, data):
    space, theta, p, omega = sc
    k = data.draw(st.integers(0, space.n_strata - 1))
    factor = data.draw(st.floats(1.05, 1.5))
    q = p.copy()
    q[k] = min(p[k] * factor, (1 + p[k]) / 2)
    rest = np.arange(space.n_strata) != k
    q[rest] *= (1 - q[k]) / p[rest].sum()
    q /= q.sum()
    base = constant_weight_target(crit, space, theta, p, omega)[k]
    moved = constant_weight_target(crit, space, theta, q, omega)[k]
    if theta[k] > 0:
        assert moved >= base - 1e-12
    else:
        assert moved <= base + 1e-12


@given(sc=scenarios())
def test_batch_rows_are_independent(sc):
    space, theta, p, omega = sc
    single, *_ = solve_compound_batch("C3", space, theta[None], p[None], omega)
    stack = np.vstack([theta, -theta, 2 * theta])
    batch, *_ = solve_compound_batch("C3", space, stack, np.tile(p, (3, 1)), omega)
    np.testing.assert_array_equal(single[0], batch[0])


def test_more_weight_means_less_information():
    theta = np.array([1.0, 2, 2, 4])
    effs = [inferential_efficiency("C1", BINARY,
                                   constant_weight_target("C1", BINARY, theta, UNIFORM, w),
                                   UNIFORM)
            for w in np.linspace(0.05, 0.95, 10)]
    assert np.all(np.diff(effs) < 0)


@pytest.mark.parametrize("C", [0.95, 0.75, 0.25])
def test_constrained_kkt(C):
    theta = np.array([1.0, 2, 2, 4])
    res = constrained_target("C1", BINARY, theta, UNIFORM, C)
    assert res.efficiencies.psi_I == pytest.approx(C, abs=1e-6)
    resid = compound_system_residual("C1", BINARY, res.pi_star, theta, UNIFORM, res.omega_C)
    assert np.max(np.abs(resid)) <= 1e-8
    assert res.kkt_multiplier == pytest.approx((1 - res.omega_C) / res.omega_C)


def test_constrained_near_one_is_near_balanced():
    res = constrained_target("C1", BINARY, np.array([1.0, 2, 2, 4]), UNIFORM, 0.999)
    assert res.omega_C < 0.1
    np.testing.assert_allclose(res.pi_star, 0.5, atol=0.02)


def test_constrained_rejects_bad_floor():
    with pytest.raises(DomainError):
        constrained_target("C1", BINARY, np.ones(4), UNIFORM, 1.0)
    with pytest.raises(DomainError):
        constrained_target("C1", BINARY, np.zeros(4), UNIFORM, 0.5)


def test_bandyopadhyay_biswas():
    theta = np.array([1.0, 2, 2, 4])
    np.testing.assert_allclose(bandyopadhyay_biswas_target(theta, 2.0),
                               [0.691, 0.841, 0.841, 0.977], atol=1e-3)
    assert bandyopadhyay_biswas_target(np.zeros(1), 1.0)[0] == 0.5
    with pytest.raises(DomainError):
        bandyopadhyay_biswas_target(theta, 0.0)


def test_ethical_target():
    np.testing.assert_array_equal(ethical_target([2.0, -1.0, 0.0]), [1.0, 0.0, 0.5])


def test_solver_error_carries_best_iterate():
    # one Newton step cannot reach 1e-10 from the balanced start
    with pytest.raises(SolverError) as info:
        compound_target("C1", BINARY, np.array([1.0, 2, 2, 4]), UNIFORM, chi_square_cdf(1),
                        max_iter=1)
    assert info.value.best is not None and info.value.residual > 1e-10


def test_bad_inputs():
    with pytest.raises(DomainError):
        compound_target("C1", BINARY, np.ones(3), UNIFORM, s_shaped(1))
    with pytest.raises(DomainError):
        compound_target("C9", BINARY, np.ones(4), UNIFORM, s_shaped(1))

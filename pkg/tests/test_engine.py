import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdbcd.criteria import StratumCounts, information_matrix
from rdbcd.design import DesignSpace, DomainError, ModelParams
from rdbcd.engine import (SimulationConfig, SingularInformationError, asymptotic_information,
                          convergence_diagnostics, replicate_rng, run_replicate, run_study,
                          simulate_replicates)
from rdbcd.randomization import atkinson_da, baz2, custom, erade, zhang_cara
from rdbcd.weights import chi_square_cdf, constant

from .conftest import BINARY, NONUNIFORM, UNIFORM, allocations, distributions, spaces

POSITIVE = ModelParams.from_effects(1.0, [1.0, 1.0, 1.0])
MIXED = ModelParams.from_effects(-4.0, [-1.0, 3.0, 3.0])


def _config(**kw):
    base = dict(space=BINARY, params=MIXED, p=NONUNIFORM, criterion="C1",
                weight=chi_square_cdf(1), rule=erade(2 / 3), n=120, m=4, replicates=6, seed=11)
    base.update(kw)
    return SimulationConfig(**base)


def _same(a, b):
    for r, s in zip(a, b):
        assert r.index == s.index
        np.testing.assert_array_equal(r.N, s.N)
        np.testing.assert_array_equal(r.Ntilde, s.Ntilde)
        np.testing.assert_array_equal(r.gamma_hat, s.gamma_hat)
        np.testing.assert_array_equal(r.target_hat, s.target_hat)
        np.testing.assert_array_equal(r.checkpoint_targets, s.checkpoint_targets)


def test_config_validation():
    with pytest.raises(DomainError):
        _config(n=8, m=4)
    with pytest.raises(DomainError):
        _config(m=0)
    with pytest.raises(DomainError):
        _config(replicates=0)
    with pytest.raises(DomainError):
        _config(p=[0.5, 0.5, 0.0, 0.0])
    with pytest.raises(DomainError):
        _config(checkpoints=(0, 10))


def test_deterministic_across_schedules():
    cfg = _config()
    ref = run_study(cfg)
    _same(ref.results, run_study(cfg).results)
    _same(ref.results, run_study(cfg, batch_size=4).results)
    _same(ref.results, run_study(cfg, batch_size=1, workers=2).results)
    _same([ref.results[3]], [run_replicate(cfg, 3)])
    _same([ref.results[4], ref.results[1]][::-1], simulate_replicates(cfg, [4, 1]))
    np.testing.assert_array_equal(ref.mean, run_study(cfg, batch_size=5).mean)


def test_seed_changes_outcome():
    a = run_replicate(_config(seed=1), 0)
    b = run_replicate(_config(seed=2), 0)
    assert not np.array_equal(a.Ntilde, b.Ntilde)
    # documented stream derivation
    rng = replicate_rng(1, 0)
    strata = rng.choice(4, size=120, p=NONUNIFORM)
    np.testing.assert_array_equal(np.bincount(strata, minlength=4), a.N)


def test_count_conservation_and_initial_pairs():
    cfg = _config(rule=custom(lambda x, y, z: np.ones_like(np.asarray(x, dtype=float))),
                  replicates=5, n=60, m=5)
    rep = run_study(cfg)
    for r in rep.results:
        assert r.N.sum() == 60
        assert np.all((r.Ntilde >= 0) & (r.Ntilde <= r.N))
        # the stub sends every adaptive subject to A, so B holds exactly the m initial ones
        assert (r.N - r.Ntilde).sum() == 5


def test_forced_rule_drives_proportions_to_one():
    cfg = _config(rule=custom(lambda x, y, z: np.ones_like(np.asarray(x, dtype=float))),
                  replicates=3, n=400)
    rep = run_study(cfg)
    assert np.all(rep.mean > 0.9)


def test_single_replicate_report():
    cfg = _config(replicates=1)
    rep = run_study(cfg)
    np.testing.assert_array_equal(rep.mean, rep.results[0].proportions)
    np.testing.assert_array_equal(rep.sd, 0.0)


def test_proportions_consistent_with_counts():
    rep = run_study(_config())
    for r in rep.results:
        np.testing.assert_array_equal(r.proportions, r.Ntilde / r.N)
        assert r.checkpoints[-1] == 120
        np.testing.assert_array_equal(r.checkpoint_proportions[-1], r.proportions)
        np.testing.assert_array_equal(r.checkpoint_targets[-1], r.target_hat)
    assert np.all(rep.sd >= 0) and np.all((rep.mean >= 0) & (rep.mean <= 1))


def test_zero_weight_balances():
    cfg = _config(weight=constant(0.0), rule=atkinson_da(), p=UNIFORM, n=2000, replicates=100,
                  seed=5, n_checkpoints=1)
    rep = run_study(cfg)
    props = np.array([r.proportions for r in rep.results])
    assert np.all(np.abs(props - 0.5) <= 0.05)


def test_known_target_gives_root_n_deviation():
    # phi = y with the true target: N-tilde is a sum of Bernoulli(pi*) draws
    cfg = _config(rule=zhang_cara(), estimate_target=False, params=POSITIVE, p=UNIFORM,
                  n=1000, replicates=200, seed=8, n_checkpoints=1)
    rep = run_study(cfg)
    pi_star = cfg.true_target()
    z = np.array([(r.proportions - pi_star) / np.sqrt(pi_star * (1 - pi_star) / r.N)
                  for r in rep.results])
    assert abs(z.mean()) < 0.15
    assert z.std() == pytest.approx(1.0, abs=0.1)


def test_convergence_summary_shape():
    cfg = _config(rule=baz2(2 / 3, 4), checkpoints=(40, 80, 120))
    rep = run_study(cfg)
    s = convergence_diagnostics(rep.results, cfg.true_target())
    assert s.checkpoints == (40, 80, 120)
    assert s.median_proportion_error.shape == (3,)
    assert np.all(s.max_target_error >= s.median_target_error)


def _enumeration_oracle(space, pi, p):
    """sum_k p_k [pi_k a_k a_k' + (1 - pi_k) b_k b_k'] over the two row types."""
    q = space.n_params
    M = np.zeros((q, q))
    for k, f in enumerate(space.regressor_matrix()):
        z = np.zeros_like(f)
        a = np.concatenate([[1.0, 0.0], f, z])
        b = np.concatenate([[0.0, 1.0], z, f])
        M += p[k] * (pi[k] * np.outer(a, a) + (1 - pi[k]) * np.outer(b, b))
    return M


@given(data=st.data())
def test_asymptotic_information_matches_oracle(data):
    space = data.draw(spaces(3))
    p = data.draw(distributions(space.n_strata))
    pi = data.draw(allocations(space.n_strata))
    M, M_inv = asymptotic_information(space, pi, p)
    np.testing.assert_allclose(M, _enumeration_oracle(space, pi, p), rtol=0, atol=1e-12)
    np.linalg.cholesky(M)
    np.testing.assert_allclose(M @ M_inv, np.eye(space.n_params), atol=1e-8)


def test_asymptotic_information_matches_integer_design():
    # p and pi with small denominators give an exact finite design
    N = np.array([20, 30, 40, 10])
    Nt = np.array([5, 12, 30, 6])
    M, _ = asymptotic_information(BINARY, Nt / N, N / N.sum())
    np.testing.assert_allclose(M, information_matrix(BINARY, StratumCounts(N, Nt)), atol=1e-14)


def test_balanced_information_structure():
    M, _ = asymptotic_information(BINARY, np.full(4, 0.5), UNIFORM)
    # with pi = 1/2 the two arms carry identical halves of the information
    np.testing.assert_allclose(M[:2, :2], np.diag([0.5, 0.5]))
    np.testing.assert_allclose(M[2:5, 2:5], M[5:, 5:])


def test_asymptotic_information_errors():
    with pytest.raises(DomainError):
        asymptotic_information(BINARY, np.array([0.0, 0.5, 0.5, 0.5]), UNIFORM)
    with pytest.raises(SingularInformationError):
        asymptotic_information(BINARY, np.array([1e-300, 0.5, 0.5, 0.5]), UNIFORM)


def test_plug_in_target_consistency_probe():
    cfg = _config(rule=baz2(2 / 3, 4), params=POSITIVE, n=4000, replicates=100, seed=21,
                  checkpoints=(250, 1000, 4000))
    rep = run_study(cfg)
    pi_star = cfg.true_target()
    dev = np.array([np.max(np.abs(r.checkpoint_targets - pi_star), axis=1) for r in rep.results])
    assert np.mean(dev[:, 2] <= dev[:, 0]) >= 0.9
    s = convergence_diagnostics(rep.results, pi_star)
    assert s.decreasing and s.trend_tau < 0

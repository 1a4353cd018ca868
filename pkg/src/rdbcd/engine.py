"""Monte Carlo simulation of the reinforced doubly adaptive biased coin design.

Replicates are simulated in lockstep: one array row per replicate, advanced
one subject at a time. Every random draw of a replicate comes from its own
stream, fixed before the trial starts, and all per-step arithmetic is
row-wise. A replicate therefore produces the same bits whether it runs
alone or inside a batch of any size.

Seeding
-------
Replicate ``i`` of a study with master seed ``s`` uses
``numpy.random.default_rng(numpy.random.SeedSequence(s, spawn_key=(i,)))``
and draws, in this order: ``n`` stratum indices, ``m`` coin flips for the
initial pairs, ``n`` uniforms for the adaptive coin and ``n`` standard
normals for the response noise.

Trial protocol
--------------
The first ``2m`` subjects are allocated in randomised pairs (one A and one B
per consecutive pair, order by coin flip), ignoring covariates. Subject
``t + 1`` (``t >= 2m``) with stratum ``k`` is assigned to A with probability
``phi(pi_t(k), pihat*_t(k), phat_t(k))`` where all estimates use the first
``t`` subjects. When the stratum is still empty ``x`` is set to ``y``. While
some stratum/arm cell has no observation gamma is not estimable and the
target estimate is the balanced allocation.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .criteria import CriterionId, as_criterion
from .design import DesignSpace, DomainError, ModelParams, check_distribution, theta_surface
from .estimation import (CLAMP_FLOOR, TrialHistory, clamp_distribution, ols_estimate,
                         theta_from_cell_means)
from .randomization import RandomizationRule
from .targets import compound_target, solve_compound_batch
from .weights import WeightSpec, weight


class SingularInformationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    space: DesignSpace
    params: ModelParams
    p: np.ndarray
    criterion: CriterionId
    weight: WeightSpec
    rule: RandomizationRule
    n: int
    m: int = 4
    replicates: int = 1
    seed: int = 0
    clamp_floor: float = CLAMP_FLOOR
    n_checkpoints: int = 20
    checkpoints: tuple = ()
    # False replaces the plug-in target by the true one (a diagnostic stub)
    estimate_target: bool = True

    def __post_init__(self):
        object.__setattr__(self, "p", check_distribution(self.space, self.p))
        object.__setattr__(self, "criterion", as_criterion(self.criterion))
        self.params.check_space(self.space)
        if not (self.n > 2 * self.m >= 2):
            raise DomainError(f"need n > 2m >= 2, got n={self.n}, m={self.m}")
        if self.replicates < 1:
            raise DomainError("need at least one replicate")
        cps = tuple(sorted(set(int(c) for c in self.checkpoints)))
        if any(c < 1 or c > self.n for c in cps):
            raise DomainError("checkpoints must lie in 1..n")
        object.__setattr__(self, "checkpoints", cps)

    def checkpoint_grid(self) -> tuple:
        if self.checkpoints:
            return self.checkpoints
        c = max(1, self.n_checkpoints)
        grid = np.unique(np.round(np.linspace(self.n / c, self.n, c)).astype(int))
        return tuple(int(v) for v in grid if v >= 1)

    def true_theta(self) -> np.ndarray:
        return theta_surface(self.space, self.params)

    def true_target(self) -> np.ndarray:
        return compound_target(self.criterion, self.space, self.true_theta(), self.p,
                               self.weight).pi_star


@dataclass(frozen=True)
class ReplicateResult:
    index: int
    proportions: np.ndarray
    N: np.ndarray
    Ntilde: np.ndarray
    gamma_hat: np.ndarray
    target_hat: np.ndarray
    checkpoints: tuple = ()
    checkpoint_proportions: np.ndarray = field(default=None, repr=False)
    checkpoint_targets: np.ndarray = field(default=None, repr=False)
    unestimable_steps: int = 0
    solver_failures: int = 0

    def to_record(self) -> dict:
        return {
            "replicate": self.index,
            "proportions": _clean(self.proportions),
            "N": self.N.tolist(),
            "Ntilde": self.Ntilde.tolist(),
            "gamma_hat": _clean(self.gamma_hat),
            "target_hat": _clean(self.target_hat),
            "unestimable_steps": self.unestimable_steps,
            "solver_failures": self.solver_failures,
        }


@dataclass(frozen=True)
class AggregateReport:
    """Across-replicate summary; ``sd`` uses the population (ddof=0) formula."""

    replicates: int
    true_target: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    gamma_bias: np.ndarray
    target_error: np.ndarray
    unestimable_steps: int
    solver_failures: int
    results: tuple = field(default=(), repr=False)


def _clean(a):
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(a, dtype=float)]


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _draws(config: SimulationConfig, index: int):
    rng = replicate_rng(config.seed, index)
    strata = rng.choice(config.space.n_strata, size=config.n, p=config.p)
    pair_first_A = rng.random(config.m) < 0.5
    coins = rng.random(config.n)
    noise = rng.standard_normal(config.n)
    return strata, pair_first_A, coins, noise


def _simulate(config: SimulationConfig, indices) -> list[ReplicateResult]:
    space, K, n, m = config.space, config.space.n_strata, config.n, config.m
    B = len(indices)
    draws = [_draws(config, i) for i in indices]
    strata = np.array([d[0] for d in draws]).reshape(B, n)
    pair_A = np.array([d[1] for d in draws]).reshape(B, m)
    coins = np.array([d[2] for d in draws]).reshape(B, n)
    noise = np.array([d[3] for d in draws]).reshape(B, n)

    F = space.regressor_matrix()
    means = np.stack([config.params.mu_B + F @ config.params.beta_B,
                      config.params.mu_A + F @ config.params.beta_A], axis=1)
    sigma = np.sqrt(config.params.sigma2)
    fixed_target = None if config.estimate_target else config.true_target()

    N = np.zeros((B, K), dtype=np.int64)
    Nt = np.zeros((B, K), dtype=np.int64)
    cell_n = np.zeros((B, K, 2), dtype=np.int64)
    cell_sum = np.zeros((B, K, 2))
    delta_hist = np.zeros((B, n), dtype=np.int64)
    y_hist = np.zeros((B, n))
    previous = np.full((B, K), 0.5)
    unestimable = np.zeros(B, dtype=np.int64)
    failures = np.zeros(B, dtype=np.int64)
    rows = np.arange(B)

    grid = config.checkpoint_grid()
    cp_index = {c: i for i, c in enumerate(grid)}
    cp_prop = np.full((B, len(grid), K), np.nan)
    cp_target = np.full((B, len(grid), K), np.nan)

    def estimate(t, count=True):
        p_hat = clamp_distribution(N / t, config.clamp_floor)
        if fixed_target is not None:
            return np.broadcast_to(fixed_target, (B, K)).copy(), p_hat
        theta_hat, ok = theta_from_cell_means(cell_n, cell_sum)
        target = np.full((B, K), 0.5)
        risk = np.sum(p_hat * np.abs(np.where(ok[:, None], theta_hat, 0.0)), axis=1)
        solve = ok & (risk > 0)
        if solve.any():
            omega = weight(config.weight, risk[solve])
            pi, _, _, conv = solve_compound_batch(
                config.criterion, space, theta_hat[solve], p_hat[solve],
                np.atleast_1d(omega), x0=previous[solve])
            sel = np.flatnonzero(solve)
            target[sel[conv]] = pi[conv]
            if count:
                failures[sel[~conv]] += 1
        if count:
            unestimable[~ok] += 1
        return target, p_hat

    def record(t, target):
        i = cp_index[t]
        with np.errstate(invalid="ignore", divide="ignore"):
            cp_prop[:, i] = np.where(N > 0, Nt / np.maximum(N, 1), np.nan)
        cp_target[:, i] = target

    for t in range(n):
        k = strata[:, t]
        if t < 2 * m:
            first = pair_A[:, t // 2]
            delta = first if t % 2 == 0 else ~first
            if t in cp_index:
                record(t, estimate(t, count=False)[0])
        else:
            target, p_hat = estimate(t)
            previous = target
            if t in cp_index:
                record(t, target)
            y_k = target[rows, k]
            n_k = N[rows, k]
            with np.errstate(invalid="ignore", divide="ignore"):
                x_k = np.where(n_k > 0, Nt[rows, k] / np.maximum(n_k, 1), y_k)
            prob = config.rule(x_k, y_k, p_hat[rows, k])
            delta = coins[:, t] < prob
        delta = delta.astype(np.int64)
        response = means[k, delta] + sigma * noise[:, t]
        N[rows, k] += 1
        Nt[rows, k] += delta
        cell_n[rows, k, delta] += 1
        cell_sum[rows, k, delta] += response
        delta_hist[:, t] = delta
        y_hist[:, t] = response

    final_target, _ = estimate(n, count=False)
    if n in cp_index:
        record(n, final_target)

    out = []
    with np.errstate(invalid="ignore", divide="ignore"):
        props = np.where(N > 0, Nt / np.maximum(N, 1), np.nan)
    for b, idx in enumerate(indices):
        hist = TrialHistory(strata[b], delta_hist[b], y_hist[b])
        gamma_hat = ols_estimate(space, hist).gamma
        out.append(ReplicateResult(int(idx), props[b], N[b].copy(), Nt[b].copy(), gamma_hat,
                                   final_target[b], grid, cp_prop[b], cp_target[b],
                                   int(unestimable[b]), int(failures[b])))
    return out


def run_replicate(config: SimulationConfig, replicate_index: int) -> ReplicateResult:
    return _simulate(config, [replicate_index])[0]


def simulate_replicates(config: SimulationConfig, indices, batch_size: int = 0,
                        workers: int = 1) -> list[ReplicateResult]:
    """Simulate the given replicate indices; output sorted by index.

    ``batch_size`` (0 = all at once) and ``workers`` change only the
    schedule, never the results.
    """
    indices = sorted(int(i) for i in indices)
    size = batch_size if batch_size > 0 else max(1, len(indices))
    chunks = [indices[i:i + size] for i in range(0, len(indices), size)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate, [config] * len(chunks), chunks))
    else:
        parts = [_simulate(config, c) for c in chunks]
    results = [r for part in parts for r in part]
    return sorted(results, key=lambda r: r.index)


def aggregate(config: SimulationConfig, results) -> AggregateReport:
    results = sorted(results, key=lambda r: r.index)
    props = np.array([r.proportions for r in results])
    gam = np.array([r.gamma_hat for r in results])
    targ = np.array([r.target_hat for r in results])
    truth = config.true_target()
    return AggregateReport(
        replicates=len(results),
        true_target=truth,
        mean=np.nanmean(props, axis=0),
        sd=np.nanstd(props, axis=0),
        gamma_bias=np.mean(gam, axis=0) - config.params.gamma,
        target_error=np.mean(np.abs(targ - truth), axis=0),
        unestimable_steps=int(sum(r.unestimable_steps for r in results)),
        solver_failures=int(sum(r.solver_failures for r in results)),
        results=tuple(results),
    )


def run_study(config: SimulationConfig, batch_size: int = 0, workers: int = 1) -> AggregateReport:
    """Run replicates ``0 .. h-1`` and aggregate them in index order."""
    results = simulate_replicates(config, range(config.replicates), batch_size, workers)
    return aggregate(config, results)


# --------------------------------------------------------------------------
# asymptotics


def _arm_blocks(space: DesignSpace, w: np.ndarray):
    """(total, first-row vector, p x p block) for one arm with stratum weights w."""
    J, L = space.J, space.L
    grid = np.zeros((J + 1, L + 1))
    for k, (j, l) in enumerate(space.strata()):
        grid[j, l] = w[k]
    wT = grid[1:, :].sum(axis=1)
    wW = grid[:, 1:].sum(axis=0)
    inner = grid[1:, 1:]
    wTW = inner.reshape(-1)

    top_right = np.zeros((J, L))
    top_right[:, :] = inner
    M11 = np.block([[np.diag(wT), top_right], [top_right.T, np.diag(wW)]])
    M12 = np.zeros((J + L, J * L))
    for j in range(J):
        M12[j, j * L:(j + 1) * L] = inner[j]
        M12[J:, j * L:(j + 1) * L] = np.diag(inner[j])
    M22 = np.diag(wTW)
    block = np.block([[M11, M12], [M12.T, M22]])
    return float(w.sum()), np.concatenate([wT, wW, wTW]), block


def asymptotic_information(space: DesignSpace, pi_star, p):
    """Limit information matrix under allocation ``pi_star`` and its inverse."""
    pi_star = np.asarray(pi_star, dtype=float)
    p = check_distribution(space, p)
    if np.any(pi_star <= 0) or np.any(pi_star >= 1):
        raise DomainError("pi_star must be interior")
    tA, vA, MA = _arm_blocks(space, pi_star * p)
    tB, vB, MB = _arm_blocks(space, (1.0 - pi_star) * p)
    q = space.p
    Z = np.zeros((q, q))
    z = np.zeros(q)
    M = np.block([
        [np.array([[tA, 0.0]]), vA[None], z[None]],
        [np.array([[0.0, tB]]), z[None], vB[None]],
        [vA[:, None], z[:, None], MA, Z],
        [z[:, None], vB[:, None], Z, MB],
    ])
    try:
        c = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(M)
        raise SingularInformationError(
            f"limit information matrix is not positive definite; min eigenvalue {eig[0]:.3e}"
        ) from None
    inv = np.linalg.inv(c)
    return M, inv.T @ inv


# --------------------------------------------------------------------------
# convergence


@dataclass(frozen=True)
class ConvergenceSummary:
    checkpoints: tuple
    median_proportion_error: np.ndarray
    median_target_error: np.ndarray
    max_proportion_error: np.ndarray
    max_target_error: np.ndarray
    trend_tau: float

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.median_proportion_error) < 0))


def convergence_diagnostics(results, pi_star) -> ConvergenceSummary:
    """Deviation of pi_n and pihat*_n from ``pi_star`` at each checkpoint.

    Per replicate the deviation is the max over strata; the summary takes the
    median and the max across replicates. ``trend_tau`` is Kendall's tau of
    the median proportion deviation against n (negative = shrinking).
    """
    results = list(results)
    if not results or results[0].checkpoint_proportions is None:
        raise DomainError("results carry no checkpoint trajectories")
    grid = results[0].checkpoints
    pi_star = np.asarray(pi_star, dtype=float)
    dev_p = np.array([np.nanmax(np.abs(r.checkpoint_proportions - pi_star), axis=1)
                      for r in results])
    dev_t = np.array([np.nanmax(np.abs(r.checkpoint_targets - pi_star), axis=1)
                      for r in results])
    med_p = np.median(dev_p, axis=0)
    tau = stats.kendalltau(np.array(grid), med_p).statistic if len(grid) > 1 else float("nan")
    return ConvergenceSummary(grid, med_p, np.median(dev_t, axis=0), dev_p.max(axis=0),
                              dev_t.max(axis=0), float(tau))

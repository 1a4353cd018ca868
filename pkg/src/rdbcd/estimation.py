"""Least-squares estimation of gamma, the empirical covariate distribution
and the plug-in estimate of the target allocation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .criteria import StratumCounts, as_criterion
from .design import DesignSpace, DomainError, ModelParams
from .targets import SolverError, balanced_target, compound_target
from .weights import WeightSpec

CLAMP_FLOOR = 1e-6
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class TrialHistory:
    """Per-subject records in arrival order: stratum index, assignment, response."""

    strata: np.ndarray
    delta: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.strata, dtype=np.int64)
        d = np.asarray(self.delta, dtype=np.int64)
        y = np.asarray(self.y, dtype=float)
        if not (s.shape == d.shape == y.shape) or s.ndim != 1:
            raise DomainError("history arrays must be vectors of equal length")
        if np.any((d != 0) & (d != 1)):
            raise DomainError("assignments must be 0 (B) or 1 (A)")
        object.__setattr__(self, "strata", s)
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_profiles(cls, space: DesignSpace, profiles, delta, y) -> TrialHistory:
        return cls([space.index(j, l) for j, l in profiles], delta, y)

    def __len__(self) -> int:
        return self.strata.size

    def counts(self, space: DesignSpace) -> StratumCounts:
        K = space.n_strata
        if np.any(self.strata < 0) or np.any(self.strata >= K):
            raise DomainError("history refers to a stratum outside the design space")
        N = np.bincount(self.strata, minlength=K)
        Nt = np.bincount(self.strata, weights=self.delta, minlength=K)
        return StratumCounts(N, Nt.astype(np.int64))


@dataclass(frozen=True)
class OLSEstimate:
    gamma: np.ndarray
    estimable: bool
    rank: int
    sigma2_hat: float

    def params(self) -> ModelParams:
        s2 = self.sigma2_hat if np.isfinite(self.sigma2_hat) and self.sigma2_hat > 0 else 1.0
        return ModelParams.from_gamma(self.gamma, s2)

    def theta(self, space: DesignSpace) -> np.ndarray:
        p = space.p
        alpha = self.gamma[0] - self.gamma[1]
        tau = self.gamma[2:2 + p] - self.gamma[2 + p:]
        return alpha + space.regressor_matrix() @ tau


@dataclass(frozen=True)
class EstimateSnapshot:
    gamma_hat: OLSEstimate
    p_hat: np.ndarray
    estimable: bool
    target_hat: np.ndarray
    solver_ok: bool = True


def design_matrix(space: DesignSpace, history: TrialHistory) -> np.ndarray:
    """X = [delta : 1 - delta : Delta F : (I - Delta) F]."""
    F = space.regressor_matrix()[history.strata]
    d = history.delta[:, None].astype(float)
    return np.hstack([d, 1.0 - d, d * F, (1.0 - d) * F])


def ols_estimate(space: DesignSpace, history: TrialHistory) -> OLSEstimate:
    """Minimum-norm least squares; ``estimable`` iff X'X is nonsingular."""
    if len(history) == 0:
        raise DomainError("cannot estimate from an empty history")
    X = design_matrix(space, history)
    gamma, _, rank, sv = np.linalg.lstsq(X, history.y, rcond=None)
    # eigenvalues of X'X are sv**2
    estimable = bool(sv.size == X.shape[1] and sv[-1] ** 2 >= RANK_RTOL * sv[0] ** 2)
    dof = len(history) - rank
    resid = history.y - X @ gamma
    sigma2_hat = float(resid @ resid / dof) if dof > 0 else float("nan")
    return OLSEstimate(gamma, estimable, int(rank), sigma2_hat)


def clamp_distribution(freq, floor: float = CLAMP_FLOOR) -> np.ndarray:
    """Raise entries below ``floor`` to it, rescaling the rest to keep sum 1."""
    freq = np.asarray(freq, dtype=float)
    K = freq.shape[-1]
    if floor * K >= 1:
        raise DomainError(f"clamp floor {floor} is too large for {K} strata")
    low = freq < floor
    while True:
        free = 1.0 - floor * low.sum(axis=-1, keepdims=True)
        rest = np.where(low, 0.0, freq)
        out = np.where(low, floor, rest * free / rest.sum(axis=-1, keepdims=True))
        newly = (out < floor) & ~low
        if not newly.any():
            return out
        low |= newly


def empirical_distribution(space: DesignSpace, history: TrialHistory,
                           clamp_floor: float = CLAMP_FLOOR) -> np.ndarray:
    if len(history) == 0:
        raise DomainError("cannot estimate a distribution from an empty history")
    N = np.bincount(history.strata, minlength=space.n_strata)
    return clamp_distribution(N / N.sum(), clamp_floor)


def theta_from_cell_means(counts, sums):
    """theta-hat from per-(stratum, arm) response means.

    With full interaction coding the model is saturated, so on an estimable
    history the least-squares fit reproduces each arm's stratum mean and
    theta-hat is the difference of the two means. ``counts`` and ``sums``
    have shape (..., K, 2) with arm 0 = B and arm 1 = A. Returns
    ``(theta, estimable)``; estimable requires every cell to be populated.
    """
    counts = np.asarray(counts)
    sums = np.asarray(sums, dtype=float)
    estimable = np.all(counts > 0, axis=(-2, -1))
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / np.maximum(counts, 1)
    return means[..., 1] - means[..., 0], estimable


def plug_in_target(crit, space: DesignSpace, history: TrialHistory, spec: WeightSpec,
                   clamp_floor: float = CLAMP_FLOOR) -> EstimateSnapshot:
    """Compound target evaluated at (theta(gamma-hat), p-hat).

    Falls back to the balanced target when gamma is not estimable or the
    solver fails; the snapshot records which happened.
    """
    crit = as_criterion(crit)
    est = ols_estimate(space, history)
    p_hat = empirical_distribution(space, history, clamp_floor)
    if not est.estimable:
        return EstimateSnapshot(est, p_hat, False, balanced_target(space))
    try:
        res = compound_target(crit, space, est.theta(space), p_hat, spec)
    except SolverError:
        return EstimateSnapshot(est, p_hat, True, balanced_target(space), False)
    return EstimateSnapshot(est, p_hat, True, res.pi_star)

"""Inferential (C1-C5) and ethical design criteria.

The inferential criteria are available two ways: closed forms in the
per-stratum proportions, and a dense evaluation from the information matrix
of a synthetic design with the same stratum counts. The two are kept
independent on purpose; the test-suite checks one against the other.

A boundary allocation (0 or 1) or an empty stratum makes every inferential
criterion infinite. This is signalled by returning ``math.inf``, never by
raising, so optimisers can treat the boundary as repelling.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .design import DesignSpace, DomainError, check_allocation, check_distribution

INFINITE_LOSS = math.inf


class CriterionId(str, enum.Enum):
    C1 = "C1"  # det V(gamma_hat)
    C2 = "C2"  # det V(beta_A_hat, beta_B_hat)
    C3 = "C3"  # tr V(gamma_hat)
    C4 = "C4"  # tr V(beta_A_hat, beta_B_hat)
    C5 = "C5"  # tr V(beta_A_hat - beta_B_hat)

    @property
    def is_determinant(self) -> bool:
        return self in (CriterionId.C1, CriterionId.C2)


def as_criterion(crit) -> CriterionId:
    try:
        return CriterionId(crit)
    except ValueError:
        raise DomainError(f"unknown criterion {crit!r}") from None


@dataclass(frozen=True)
class StratumCounts:
    """Subjects per stratum (``N``) and how many of them received A (``Ntilde``)."""

    N: np.ndarray
    Ntilde: np.ndarray

    def __post_init__(self):
        N = np.asarray(self.N)
        Nt = np.asarray(self.Ntilde)
        if N.shape != Nt.shape or N.ndim != 1:
            raise DomainError("N and Ntilde must be vectors of equal length")
        if np.any(N != np.round(N)) or np.any(Nt != np.round(Nt)):
            raise DomainError("stratum counts must be integers")
        N = N.astype(np.int64)
        Nt = Nt.astype(np.int64)
        if np.any(Nt < 0) or np.any(Nt > N):
            raise DomainError("need 0 <= Ntilde <= N in every stratum")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "Ntilde", Nt)

    @property
    def n(self) -> int:
        return int(self.N.sum())

    @property
    def n_A(self) -> int:
        return int(self.Ntilde.sum())

    def proportions(self) -> np.ndarray:
        """pi_n(j, l) = Ntilde / N; NaN where the stratum is empty."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.N > 0, self.Ntilde / np.maximum(self.N, 1), np.nan)


@dataclass(frozen=True)
class EfficiencyPair:
    """Standardised efficiencies; ``psi_E`` is None when E|theta| = 0."""

    psi_E: float | None
    psi_I: float


# --------------------------------------------------------------------------
# information matrix and the dense oracle


def _check_counts(space: DesignSpace, counts: StratumCounts) -> None:
    if counts.N.shape != (space.n_strata,):
        raise DomainError(f"counts need {space.n_strata} strata, got {counts.N.shape}")


def design_matrix_from_counts(space: DesignSpace, counts: StratumCounts) -> np.ndarray:
    """Rows ``[delta, 1 - delta, delta f(z), (1 - delta) f(z)]`` of a synthetic design."""
    _check_counts(space, counts)
    F = space.regressor_matrix()
    rows = []
    for k in range(space.n_strata):
        f = F[k]
        a_row = np.concatenate([[1.0, 0.0], f, np.zeros_like(f)])
        b_row = np.concatenate([[0.0, 1.0], np.zeros_like(f), f])
        rows.extend([a_row] * int(counts.Ntilde[k]))
        rows.extend([b_row] * int(counts.N[k] - counts.Ntilde[k]))
    return np.array(rows).reshape(-1, space.n_params)


def information_matrix(space: DesignSpace, counts: StratumCounts) -> np.ndarray:
    """Per-observation information matrix ``M = X'X / n``."""
    _check_counts(space, counts)
    if counts.n == 0:
        raise DomainError("information matrix needs at least one subject")
    X = design_matrix_from_counts(space, counts)
    return X.T @ X / counts.n


def is_singular(M: np.ndarray, rtol: float = 1e-12) -> bool:
    """LU with partial pivoting; singular when a pivot is below ``rtol * scale``."""
    scale = np.max(np.abs(M))
    if scale == 0:
        return True
    lu, _ = scipy.linalg.lu_factor(M, check_finite=False)
    return bool(np.min(np.abs(np.diag(lu))) < rtol * scale)


def criterion_from_matrix(crit, M: np.ndarray, n: float, sigma2: float = 1.0) -> float:
    """Evaluate C1-C5 by dense inversion of the information matrix."""
    crit = as_criterion(crit)
    if is_singular(M):
        return INFINITE_LOSS
    q = M.shape[0]
    p = (q - 2) // 2
    V = sigma2 / n * np.linalg.inv(M)
    if crit is CriterionId.C1:
        return float(np.linalg.det(V))
    if crit is CriterionId.C3:
        return float(np.trace(V))
    if crit is CriterionId.C5:
        E = np.vstack([np.zeros((2, p)), np.eye(p), -np.eye(p)])
        return float(np.trace(E.T @ V @ E))
    D = np.vstack([np.zeros((2, 2 * p)), np.eye(2 * p)])
    sub = D.T @ V @ D
    if crit is CriterionId.C2:
        return float(np.linalg.det(sub))
    return float(np.trace(sub))


# --------------------------------------------------------------------------
# closed forms


def trace_weights(crit, space: DesignSpace) -> np.ndarray:
    """Per-stratum multipliers of ``sigma2 / (N pi (1 - pi))`` in the trace criteria."""
    crit = as_criterion(crit)
    if crit.is_determinant:
        raise DomainError(f"{crit.value} is not a trace criterion")
    w = np.ones(space.n_strata)
    for k, (j, l) in enumerate(space.strata()):
        if j == 0 and l == 0:
            w[k] = (space.J + 1) * (space.L + 1)
            if crit is not CriterionId.C3:
                w[k] -= 1
        elif l == 0:
            w[k] = space.L + 1
        elif j == 0:
            w[k] = space.J + 1
    return w


def _closed_form(crit, space, N, pi, n_A, n, sigma2):
    # N may be fractional (expected counts); pi interior is checked by callers
    crit = as_criterion(crit)
    var = pi * (1.0 - pi)
    if crit.is_determinant:
        log_den = np.sum(np.log(var) + 2.0 * np.log(N))
        if crit is CriterionId.C1:
            return math.exp((2 + 2 * space.p) * math.log(sigma2) - log_den)
        return math.exp(math.log(n_A) + math.log(n - n_A)
                        + 2 * space.p * math.log(sigma2) - log_den)
    return float(sigma2 * np.sum(trace_weights(crit, space) / (N * var)))


def criterion_closed_form(crit, space: DesignSpace, counts: StratumCounts,
                          sigma2: float = 1.0) -> float:
    """C1-C5 from the stratum counts via the simplified closed forms."""
    _check_counts(space, counts)
    if np.any(counts.N == 0):
        return INFINITE_LOSS
    pi = counts.proportions()
    if np.any(pi <= 0) or np.any(pi >= 1):
        return INFINITE_LOSS
    return _closed_form(crit, space, counts.N.astype(float), pi,
                        counts.n_A, counts.n, sigma2)


def expected_inferential(crit, space: DesignSpace, pi, p, n: float,
                         sigma2: float = 1.0) -> float:
    """Covariate-averaged loss with the plug-in ``E[g(N)] ~ g(n p)``."""
    pi = check_allocation(space, pi)
    p = check_distribution(space, p)
    if np.any(pi <= 0) or np.any(pi >= 1):
        return INFINITE_LOSS
    N = n * p
    n_A = n * float(np.dot(p, pi))
    return _closed_form(crit, space, N, pi, n_A, n, sigma2)


def inferential_efficiency(crit, space: DesignSpace, pi, p) -> float:
    """Psi_I = loss(balanced) / loss(pi), in [0, 1].

    C1 and C2 share the standardised form ``4^K prod pi (1 - pi)``; for the
    trace criteria the plug-in sample size and sigma2 cancel.
    """
    crit = as_criterion(crit)
    pi = check_allocation(space, pi)
    p = check_distribution(space, p)
    var = pi * (1.0 - pi)
    if crit.is_determinant:
        return float(np.prod(4.0 * var))
    if np.any(var == 0):
        return 0.0
    c = trace_weights(crit, space) / p
    return float(4.0 * np.sum(c) / np.sum(c / var))


# --------------------------------------------------------------------------
# ethics


def ethical_expected(space: DesignSpace, pi, theta, p) -> float:
    """Expected proportion on the better arm, weighted by |theta|."""
    pi = check_allocation(space, pi)
    p = check_distribution(space, p)
    theta = np.asarray(theta, dtype=float)
    return float(np.sum(p * np.abs(theta) * (0.5 - (0.5 - pi) * np.sign(theta))))


def overall_risk(theta, p) -> float:
    """E|theta(Z)|, the ethical loss of the ideal allocation."""
    return float(np.sum(np.asarray(p, dtype=float) * np.abs(np.asarray(theta, dtype=float))))


def ethical_efficiency(space: DesignSpace, pi, theta, p) -> float | None:
    risk = overall_risk(theta, p)
    if risk == 0:
        return None
    return ethical_expected(space, pi, theta, p) / risk


def efficiencies(crit, space: DesignSpace, pi, theta, p) -> EfficiencyPair:
    return EfficiencyPair(ethical_efficiency(space, pi, theta, p),
                          inferential_efficiency(crit, space, pi, p))

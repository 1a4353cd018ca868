"""Covariate grid, dummy coding and the treatment-effect-difference surface.

Two categorical covariates T (levels 0..J) and W (levels 0..L) are crossed
into ``(J + 1) * (L + 1)`` strata. Level 0 of each covariate is the reference
category.

Stratum order
-------------
Every per-stratum vector in this package (covariate probabilities, allocation
proportions, theta, counts) uses the same order: the T level ``j`` varies
fastest, i.e. ``index = l * (J + 1) + j``. For two binary covariates this is
``(0,0), (1,0), (0,1), (1,1)``, the column order used throughout the
published tables.

Regressor layout
----------------
``f(z) = (T-dummies | W-dummies | T x W interactions)`` with
``p = J + L + J * L``. The interaction block is the Kronecker product of the
T and W dummy vectors, so the interaction for ``(j, l)`` sits at offset
``(j - 1) * L + (l - 1)`` inside the block (j-major).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class Profile(NamedTuple):
    j: int
    l: int


@dataclass(frozen=True)
class DesignSpace:
    """The (J + 1) x (L + 1) covariate grid."""

    J: int
    L: int

    def __post_init__(self):
        if int(self.J) != self.J or int(self.L) != self.L:
            raise DomainError("J and L must be integers")
        if self.J < 1 or self.L < 1:
            raise DomainError(f"need J >= 1 and L >= 1, got J={self.J}, L={self.L}")

    @property
    def p(self) -> int:
        """Regressor dimension with full interaction coding."""
        return self.J + self.L + self.J * self.L

    @property
    def n_strata(self) -> int:
        return (self.J + 1) * (self.L + 1)

    @property
    def n_params(self) -> int:
        """Length of gamma = (mu_A, mu_B, beta_A, beta_B)."""
        return 2 + 2 * self.p

    def index(self, j: int, l: int) -> int:
        self.check_profile(j, l)
        return l * (self.J + 1) + j

    def profile(self, k: int) -> Profile:
        if not 0 <= k < self.n_strata:
            raise DomainError(f"stratum index {k} outside 0..{self.n_strata - 1}")
        l, j = divmod(k, self.J + 1)
        return Profile(j, l)

    def strata(self) -> list[Profile]:
        return [self.profile(k) for k in range(self.n_strata)]

    def check_profile(self, j: int, l: int) -> None:
        if not (0 <= j <= self.J and 0 <= l <= self.L):
            raise DomainError(f"profile ({j}, {l}) outside grid J={self.J}, L={self.L}")

    def regressor(self, j: int, l: int) -> np.ndarray:
        """Dummy-coded regressor f(z) for profile (j, l); zero at (0, 0)."""
        self.check_profile(j, l)
        t = np.zeros(self.J)
        w = np.zeros(self.L)
        if j > 0:
            t[j - 1] = 1.0
        if l > 0:
            w[l - 1] = 1.0
        return np.concatenate([t, w, np.kron(t, w)])

    def regressor_matrix(self) -> np.ndarray:
        """Rows f(z_k) for every stratum k, shape (n_strata, p)."""
        return np.array([self.regressor(*pr) for pr in self.strata()])

    def profile_labels(self) -> list[str]:
        return [f"({pr.j},{pr.l})" for pr in self.strata()]


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the linear homoscedastic response model.

    ``E[Y] = delta*mu_A + (1 - delta)*mu_B + f(z)'(delta*beta_A + (1 - delta)*beta_B)``
    with variance ``sigma2``.
    """

    mu_A: float
    mu_B: float
    beta_A: np.ndarray
    beta_B: np.ndarray
    sigma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "beta_A", np.asarray(self.beta_A, dtype=float).copy())
        object.__setattr__(self, "beta_B", np.asarray(self.beta_B, dtype=float).copy())
        if self.beta_A.shape != self.beta_B.shape or self.beta_A.ndim != 1:
            raise DomainError("beta_A and beta_B must be vectors of equal length")
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")

    @classmethod
    def from_effects(cls, alpha, tau, mu_B=0.0, beta_B=None, sigma2=1.0):
        """Build parameters from the effect difference ``(alpha, tau)``.

        The B-arm baseline defaults to zero, so ``mu_A = alpha`` and
        ``beta_A = tau``.
        """
        tau = np.asarray(tau, dtype=float)
        beta_B = np.zeros_like(tau) if beta_B is None else np.asarray(beta_B, dtype=float)
        return cls(mu_B + alpha, mu_B, beta_B + tau, beta_B, sigma2)

    @classmethod
    def from_gamma(cls, gamma, sigma2=1.0):
        gamma = np.asarray(gamma, dtype=float)
        p = (gamma.size - 2) // 2
        if gamma.size != 2 + 2 * p:
            raise DomainError(f"gamma has invalid length {gamma.size}")
        return cls(gamma[0], gamma[1], gamma[2:2 + p], gamma[2 + p:], sigma2)

    @property
    def gamma(self) -> np.ndarray:
        return np.concatenate([[self.mu_A, self.mu_B], self.beta_A, self.beta_B])

    @property
    def alpha(self) -> float:
        return self.mu_A - self.mu_B

    @property
    def tau(self) -> np.ndarray:
        return self.beta_A - self.beta_B

    def check_space(self, space: DesignSpace) -> None:
        if self.beta_A.size != space.p:
            raise DomainError(
                f"beta vectors have length {self.beta_A.size}, space needs p={space.p}")

    def mean_response(self, space: DesignSpace, k, delta) -> np.ndarray:
        """Expected response in stratum(s) ``k`` under assignment(s) ``delta``."""
        F = space.regressor_matrix()
        arm_A = self.mu_A + F @ self.beta_A
        arm_B = self.mu_B + F @ self.beta_B
        k = np.asarray(k)
        return np.where(np.asarray(delta) == 1, arm_A[k], arm_B[k])


def theta_surface(space: DesignSpace, params: ModelParams) -> np.ndarray:
    """theta(j, l) = alpha + f(z)' tau for every stratum, in stratum order."""
    params.check_space(space)
    return params.alpha + space.regressor_matrix() @ params.tau


def check_distribution(space: DesignSpace, p, tol: float = 1e-12) -> np.ndarray:
    """Validate a covariate distribution and return it as an array."""
    p = np.asarray(p, dtype=float)
    if p.shape != (space.n_strata,):
        raise DomainError(f"distribution needs {space.n_strata} entries, got shape {p.shape}")
    if np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise DomainError("every stratum probability must be strictly positive")
    if abs(p.sum() - 1.0) > tol:
        raise DomainError(f"stratum probabilities sum to {p.sum():.15g}, not 1")
    return p


def check_allocation(space: DesignSpace, pi, interior: bool = False) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (space.n_strata,):
        raise DomainError(f"allocation needs {space.n_strata} entries, got shape {pi.shape}")
    if np.any(pi < 0) or np.any(pi > 1) or np.any(~np.isfinite(pi)):
        raise DomainError("allocation proportions must lie in [0, 1]")
    if interior and (np.any(pi <= 0) or np.any(pi >= 1)):
        raise DomainError("allocation proportions must lie in (0, 1)")
    return pi

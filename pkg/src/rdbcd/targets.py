"""Target allocations: balanced, ethical, compound-optimal and constrained.

The compound target minimises

    Psi_omega(pi) = omega / Psi_E(pi) + (1 - omega) / Psi_I(pi)

which is strictly convex on the open cube. It is solved by damped Newton in
logit coordinates ``u = log(pi / (1 - pi))`` so every iterate is interior.
The step uses the pi-space Hessian pulled back through the logit map
(``S H S`` with ``S = diag(pi (1 - pi))``); it is positive definite, and it
agrees with the exact logit Hessian at the optimum, so convergence stays
quadratic.

:func:`solve_compound_batch` works on a stack of independent problems. All
arithmetic is row-wise, so a row's iterates do not depend on which other
rows share the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .criteria import (CriterionId, EfficiencyPair, as_criterion, efficiencies,
                       inferential_efficiency, overall_risk, trace_weights)
from .design import DesignSpace, DomainError, check_distribution
from .weights import OMEGA_MAX, WeightSpec, weight

GRADIENT_TOL = 1e-10
MAX_ITER = 200
_U_CLIP = 30.0


class SolverError(RuntimeError):
    """The Newton or bisection solver did not reach its tolerance."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


@dataclass(frozen=True)
class CompoundTargetResult:
    pi_star: np.ndarray
    omega_value: float
    gradient_residual: float
    efficiencies: EfficiencyPair
    iterations: int = 0
    degenerate: bool = False


@dataclass(frozen=True)
class ConstrainedTargetResult:
    omega_C: float
    pi_star: np.ndarray
    efficiencies: EfficiencyPair
    kkt_multiplier: float
    bisection_steps: int


def balanced_target(space: DesignSpace) -> np.ndarray:
    return np.full(space.n_strata, 0.5)


def ethical_target(theta) -> np.ndarray:
    """All subjects on the better arm; 1/2 where the arms tie."""
    theta = np.asarray(theta, dtype=float)
    return np.where(theta > 0, 1.0, np.where(theta < 0, 0.0, 0.5))


def bandyopadhyay_biswas_target(theta, T: float) -> np.ndarray:
    """Limiting allocation Phi(theta / T) of the Bandyopadhyay-Biswas rule."""
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")
    return special.ndtr(np.asarray(theta, dtype=float) / T)


# --------------------------------------------------------------------------
# objective


def _inferential_coefficients(crit, space, p):
    """Per-row coefficients c of the trace criteria; None for C1/C2."""
    crit = as_criterion(crit)
    if crit.is_determinant:
        return None
    return trace_weights(crit, space) / p


def _inverse_psi_I(c, pi, order):
    """1/Psi_I with gradient and (diagonal, rank-one) Hessian pieces, row-wise.

    Returns (value, grad, hess) where hess has shape (B, K, K) when order > 1.
    """
    v = pi * (1.0 - pi)
    if c is None:
        R = np.exp(-np.sum(np.log(4.0 * v), axis=-1))
        if order == 0:
            return R, None, None
        h1 = (2.0 * pi - 1.0) / v
        g = R[:, None] * h1
        if order == 1:
            return R, g, None
        h2 = (1.0 - 2.0 * pi + 2.0 * pi * pi) / (v * v)
        H = R[:, None, None] * (h1[:, :, None] * h1[:, None, :])
        H += _diag(R[:, None] * h2)
        return R, g, H
    S0 = 4.0 * np.sum(c, axis=-1)
    R = np.sum(c / v, axis=-1) / S0
    if order == 0:
        return R, None, None
    g = c * (2.0 * pi - 1.0) / (v * v) / S0[:, None]
    if order == 1:
        return R, g, None
    h2 = 2.0 * c * (1.0 - 3.0 * pi + 3.0 * pi * pi) / (v * v * v) / S0[:, None]
    return R, g, _diag(h2)


def _diag(x):
    K = x.shape[-1]
    out = np.zeros(x.shape + (K,))
    idx = np.arange(K)
    out[..., idx, idx] = x
    return out


def _objective(c, theta, p, omega, pi, order=0):
    """Psi_omega and derivatives in pi for a batch of rows."""
    abs_w = p * np.abs(theta)
    a = p * theta
    risk = np.sum(abs_w, axis=-1)
    coef = omega * risk
    phi_E = np.sum(0.5 * abs_w + a * (pi - 0.5), axis=-1)
    has_E = coef > 0
    safe_phi = np.where(has_E, phi_E, 1.0)
    val_E = np.where(has_E, coef / safe_phi, 0.0)
    R, gR, HR = _inverse_psi_I(c, pi, order)
    val = val_E + (1.0 - omega) * R
    if order == 0:
        return val, None, None
    gE = -(val_E / safe_phi)[:, None] * a
    g = gE + (1.0 - omega)[:, None] * gR
    if order == 1:
        return val, g, None
    HE = (2.0 * val_E / safe_phi ** 2)[:, None, None] * (a[:, :, None] * a[:, None, :])
    H = HE + (1.0 - omega)[:, None, None] * HR
    return val, g, H


def compound_objective(crit, space: DesignSpace, pi, theta, p, omega):
    """(Psi_omega, gradient, Hessian) in pi-space for one problem."""
    pi = np.atleast_2d(np.asarray(pi, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    c = _inferential_coefficients(crit, space, p)
    val, g, H = _objective(c, theta, p, np.atleast_1d(float(omega)), pi, order=2)
    return float(val[0]), g[0], H[0]


def compound_system_residual(crit, space: DesignSpace, pi, theta, p, omega) -> np.ndarray:
    """LHS - RHS of the first-order system characterising the compound target.

    ``Phi_E(pi)^2 d(Phi_I / Phi_I(1/2))/d pi = omega/(1 - omega) E|theta| theta p``,
    one entry per stratum.
    """
    pi = np.atleast_2d(np.asarray(pi, dtype=float))
    p2 = np.atleast_2d(np.asarray(p, dtype=float))
    theta = np.asarray(theta, dtype=float)
    c = _inferential_coefficients(crit, space, p2)
    _, gR, _ = _inverse_psi_I(c, pi, 1)
    phi_E = np.sum(p2[0] * np.abs(theta) * (0.5 - (0.5 - pi[0]) * np.sign(theta)))
    rhs = omega / (1.0 - omega) * overall_risk(theta, p2[0]) * theta * p2[0]
    return phi_E ** 2 * gR[0] - rhs


# --------------------------------------------------------------------------
# solver


def solve_compound_batch(crit, space: DesignSpace, theta, p, omega, x0=None,
                         tol: float = GRADIENT_TOL, max_iter: int = MAX_ITER):
    """Minimise Psi_omega for each row of ``theta``/``p``/``omega``.

    Returns ``(pi, residual, iterations, converged)``. Rows whose Newton
    iteration stalls or runs out of iterations keep their best iterate and
    are flagged ``converged = False``.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    B, K = theta.shape
    omega = np.broadcast_to(np.asarray(omega, dtype=float), (B,)).copy()
    c_all = _inferential_coefficients(crit, space, p)

    if x0 is None:
        u = np.zeros((B, K))
    else:
        x0 = np.clip(np.asarray(x0, dtype=float).reshape(B, K), 1e-13, 1 - 1e-13)
        u = np.clip(np.log(x0) - np.log1p(-x0), -_U_CLIP, _U_CLIP)

    residual = np.full(B, np.inf)
    iterations = np.zeros(B, dtype=np.int64)
    converged = np.zeros(B, dtype=bool)
    active = np.ones(B, dtype=bool)
    polished = np.zeros(B, dtype=bool)

    for it in range(max_iter + 1):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        ur = u[rows]
        cr = None if c_all is None else c_all[rows]
        th, pr, om = theta[rows], p[rows], omega[rows]
        pi = special.expit(ur)
        val, g, H = _objective(cr, th, pr, om, pi, order=2)
        res = np.max(np.abs(g), axis=-1)
        residual[rows] = res
        done = res <= tol
        # one extra Newton step after reaching tol; it is quadratic there, so the
        # first-order system then holds to rounding level
        finish = done & polished[rows]
        polished[rows[done]] = True
        if it == max_iter:
            converged[rows[done]] = True
            active[rows] = False
            break
        converged[rows[finish]] = True
        active[rows[finish]] = False
        keep = ~finish
        if not np.any(keep):
            continue
        rows, ur, val, g, H = rows[keep], ur[keep], val[keep], g[keep], H[keep]
        th, pr, om, pi = th[keep], pr[keep], om[keep], pi[keep]
        cr = None if cr is None else cr[keep]

        s = pi * (1.0 - pi)
        gu = s * g
        Hu = H * (s[:, :, None] * s[:, None, :])
        d = -np.linalg.solve(Hu, gu[:, :, None])[:, :, 0]
        slope = np.sum(gu * d, axis=-1)

        step = np.ones(rows.size)
        accepted = np.zeros(rows.size, dtype=bool)
        # a full step is taken once the predicted decrease is at rounding level
        accepted |= -slope <= 1e-15 * np.abs(val)
        u_new = ur.copy()
        u_new[accepted] = np.clip(ur[accepted] + d[accepted], -_U_CLIP, _U_CLIP)
        for _ in range(60):
            todo = np.flatnonzero(~accepted)
            if todo.size == 0:
                break
            trial = np.clip(ur[todo] + step[todo, None] * d[todo], -_U_CLIP, _U_CLIP)
            ct = None if cr is None else cr[todo]
            vt, _, _ = _objective(ct, th[todo], pr[todo], om[todo], special.expit(trial))
            ok = vt <= val[todo] + 1e-4 * step[todo] * slope[todo]
            u_new[todo[ok]] = trial[ok]
            accepted[todo[ok]] = True
            step[todo[~ok]] *= 0.5
        stalled = ~accepted
        # a stalled polishing step keeps the iterate that already met tol
        converged[rows[stalled & polished[rows]]] = True
        active[rows[stalled]] = False
        u[rows] = u_new
        iterations[rows] += 1

    return special.expit(u), residual, iterations, converged


def compound_target(crit, space: DesignSpace, theta, p, spec: WeightSpec,
                    tol: float = GRADIENT_TOL, max_iter: int = MAX_ITER,
                    x0=None) -> CompoundTargetResult:
    """Unique minimiser of the compound criterion.

    The weight is evaluated once, at the overall risk ``E|theta|`` of the
    supplied theta and p. When that risk is zero the problem degenerates and
    the balanced target is returned with ``degenerate=True``.
    """
    crit = as_criterion(crit)
    p = check_distribution(space, p)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (space.n_strata,):
        raise DomainError(f"theta needs {space.n_strata} entries, got {theta.shape}")
    risk = overall_risk(theta, p)
    if risk == 0:
        pi = balanced_target(space)
        return CompoundTargetResult(pi, 0.0, 0.0, efficiencies(crit, space, pi, theta, p),
                                    0, True)
    omega = weight(spec, risk)
    pi, res, its, ok = solve_compound_batch(crit, space, theta[None], p[None], omega,
                                            x0=x0, tol=tol, max_iter=max_iter)
    if not ok[0]:
        raise SolverError(f"Newton did not converge: residual {res[0]:.3e} after "
                          f"{its[0]} iterations", best=pi[0], residual=float(res[0]))
    return CompoundTargetResult(pi[0], float(omega), float(res[0]),
                                efficiencies(crit, space, pi[0], theta, p), int(its[0]))


def constant_weight_target(crit, space, theta, p, omega, x0=None):
    """Compound target for a fixed weight value, bypassing the weight family."""
    p = check_distribution(space, p)
    theta = np.asarray(theta, dtype=float)
    pi, res, its, ok = solve_compound_batch(crit, space, theta[None], p[None], omega,
                                            x0=x0)
    if not ok[0]:
        raise SolverError(f"Newton did not converge at omega={omega}", best=pi[0],
                          residual=float(res[0]))
    return pi[0]


def constrained_target(crit, space: DesignSpace, theta, p, efficiency_floor: float,
                       tol: float = 1e-6, max_steps: int = 200) -> ConstrainedTargetResult:
    """Most ethical allocation whose inferential efficiency equals ``efficiency_floor``.

    Bisection over the constant weight omega: Psi_I of the compound target
    falls continuously and monotonically from 1 (omega = 0) toward 0.
    """
    C = float(efficiency_floor)
    if not 0 < C < 1:
        raise DomainError(f"efficiency floor must lie in (0, 1), got {C}")
    crit = as_criterion(crit)
    p = check_distribution(space, p)
    theta = np.asarray(theta, dtype=float)
    if overall_risk(theta, p) == 0:
        raise DomainError("constrained target is undefined when E|theta| = 0")

    lo, hi = 0.0, OMEGA_MAX
    pi_hi = constant_weight_target(crit, space, theta, p, hi)
    if inferential_efficiency(crit, space, pi_hi, p) > C:
        raise SolverError(f"cannot bracket efficiency {C}: even omega -> 1 keeps "
                          f"Psi_I above it", best=pi_hi)
    pi = balanced_target(space)
    for step in range(1, max_steps + 1):
        mid = 0.5 * (lo + hi)
        pi = constant_weight_target(crit, space, theta, p, mid, x0=pi)
        gap = inferential_efficiency(crit, space, pi, p) - C
        if abs(gap) <= tol:
            return ConstrainedTargetResult(mid, pi, efficiencies(crit, space, pi, theta, p),
                                           (1.0 - mid) / mid, step)
        if gap > 0:
            lo = mid
        else:
            hi = mid
    raise SolverError(f"bisection did not reach |Psi_I - C| <= {tol}", best=pi)

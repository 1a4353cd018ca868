"""Allocation-probability functions phi(x, y, z) of the reinforced doubly
adaptive biased coin design.

``x`` is the current proportion of the stratum assigned to A, ``y`` the
current estimate of the target for that stratum and ``z`` the estimated
probability of the stratum. A rule returns the probability of assigning
the next subject of that stratum to A.

Built-in rules are constructed from the generic family

    phi = F[D(x;y)^H(z) F^-1(y)] / (F[D(x;y)^H(z) F^-1(y)] + F[D(1-x;1-y)^H(z) F^-1(1-y)])

whenever they are members of it. All functions are vectorised over numpy
arrays of equal shape.

``x`` is accepted on the closed interval [0, 1] because observed stratum
proportions hit 0 and 1 in small strata; ``y`` and ``z`` must be interior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .design import DomainError

Z_FLOOR = 1e-6

KINDS = ("zhang_cara", "baz1", "baz2", "erade", "atkinson_da", "dbcd", "custom_family",
         "custom")


@dataclass(frozen=True)
class Family:
    """Pluggable (F, F^-1, D, H) of the generic family.

    F must be continuous and strictly increasing on the positive reals, H
    nonincreasing, and D decreasing in x, increasing in y with D(x; x) = 1.
    """

    F: Callable
    F_inv: Callable
    D: Callable
    H: Callable

    def __call__(self, x, y, z):
        h = self.H(z)
        a = self.F(self.D(x, y) ** h * self.F_inv(y))
        b = self.F(self.D(1.0 - x, 1.0 - y) ** h * self.F_inv(1.0 - y))
        return a / (a + b)


def _identity(t):
    return t


def _constant_one(t):
    return np.ones_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class RandomizationRule:
    kind: str
    params: dict = field(default_factory=dict)
    func: Callable | None = field(default=None, compare=False, repr=False)

    def __call__(self, x, y, z):
        return allocation_probability(self, x, y, z)

    def to_dict(self) -> dict:
        if self.kind in ("custom_family", "custom"):
            raise DomainError("custom rules cannot be serialised")
        return {"kind": self.kind, **{k: float(v) for k, v in self.params.items()}}

    def label(self) -> str:
        extra = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.kind}({extra})" if extra else self.kind


def zhang_cara() -> RandomizationRule:
    """phi_Z(x, y, z) = y: assign with the current target estimate."""
    return RandomizationRule("zhang_cara")


def baz1(k: float = 1.0) -> RandomizationRule:
    if not k > 0:
        raise DomainError(f"baz1 needs k > 0, got {k}")
    return RandomizationRule("baz1", {"k": float(k)})


def baz2(epsilon: float, n_strata: int) -> RandomizationRule:
    if not 0 <= epsilon < 1:
        raise DomainError(f"baz2 needs epsilon in [0, 1), got {epsilon}")
    return RandomizationRule("baz2", {"epsilon": float(epsilon), "n_strata": int(n_strata)})


def erade(rho: float) -> RandomizationRule:
    if not 0 <= rho < 1:
        raise DomainError(f"erade needs rho in [0, 1), got {rho}")
    return RandomizationRule("erade", {"rho": float(rho)})


def atkinson_da() -> RandomizationRule:
    """Atkinson's D_A-optimal rule; only meaningful for the balanced target."""
    return RandomizationRule("atkinson_da")


def dbcd(nu: float) -> RandomizationRule:
    """Doubly adaptive biased coin extension: F(t)=t, D=y/x, H=nu."""
    if not nu >= 0:
        raise DomainError(f"dbcd needs nu >= 0, got {nu}")
    return RandomizationRule("dbcd", {"nu": float(nu)})


def custom_family(family: Family) -> RandomizationRule:
    return RandomizationRule("custom_family", {}, family)


def custom(func: Callable) -> RandomizationRule:
    """Arbitrary ``func(x, y, z)``; no axioms are assumed (used for stubs)."""
    return RandomizationRule("custom", {}, func)


def from_dict(d: dict, n_strata: int | None = None) -> RandomizationRule:
    d = dict(d)
    kind = d.pop("kind")
    if kind == "zhang_cara":
        return zhang_cara()
    if kind == "baz1":
        return baz1(d.get("k", 1.0))
    if kind == "baz2":
        return baz2(d["epsilon"], int(d.get("n_strata", n_strata)))
    if kind == "erade":
        return erade(d["rho"])
    if kind == "atkinson_da":
        return atkinson_da()
    if kind == "dbcd":
        return dbcd(d["nu"])
    raise DomainError(f"rule kind {kind!r} cannot be built from a config")


def family_of(rule: RandomizationRule) -> Family | None:
    """The (F, F^-1, D, H) representation of a built-in rule, if it has one."""
    if rule.kind == "custom_family":
        return rule.func
    if rule.kind == "zhang_cara":
        return Family(_identity, _identity, lambda x, y: np.ones_like(x), _constant_one)
    if rule.kind == "baz1":
        k = rule.params["k"]
        return Family(lambda t: t ** k, lambda t: t ** (1.0 / k),
                      lambda x, y: 1.0 - (x - y), lambda z: 1.0 / z)
    if rule.kind == "baz2":
        eps, K = rule.params["epsilon"], rule.params["n_strata"]

        def D(x, y):
            return np.where(x < y, 1.0 + eps, np.where(x > y, 1.0 - eps, 1.0))

        return Family(_identity, _identity, D, lambda z: 1.0 / (K * z))
    if rule.kind == "dbcd":
        nu = rule.params["nu"]
        return Family(_identity, _identity, lambda x, y: y / x,
                      lambda z: np.full_like(np.asarray(z, dtype=float), nu))
    return None


def _check(x, y, z):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(~(x >= 0)) or np.any(~(x <= 1)):
        raise DomainError("current proportion x must lie in [0, 1]")
    if np.any(~(y > 0)) or np.any(~(y < 1)):
        raise DomainError("target estimate y must lie in (0, 1)")
    if np.any(~(z > 0)) or np.any(~(z < 1)):
        raise DomainError("stratum probability z must lie in (0, 1)")
    return x, y, z


def allocation_probability(rule: RandomizationRule, x, y, z):
    """Probability of assigning treatment A; scalars in, float out."""
    if rule.kind == "custom":
        return rule.func(x, y, z)
    x, y, z = _check(x, y, z)
    scalar = x.ndim == 0 and y.ndim == 0 and z.ndim == 0
    x, y, z = np.broadcast_arrays(x, y, z)
    kind = rule.kind
    if kind == "zhang_cara":
        out = y.copy()
    elif kind == "erade":
        rho = rule.params["rho"]
        out = np.where(x < y, 1.0 - rho * (1.0 - y), np.where(x > y, rho * y, y))
    elif kind == "atkinson_da":
        out = (1.0 - x) ** 2 / ((1.0 - x) ** 2 + x * x)
    elif kind == "baz1":
        # ratio form: the exponent k/z is huge in rare strata
        e = rule.params["k"] / z
        with np.errstate(over="ignore"):
            r = ((1.0 - (y - x)) / (1.0 - (x - y))) ** e
            out = 1.0 / (1.0 + (1.0 - y) / y * r)
    elif kind == "baz2":
        eps, K = rule.params["epsilon"], rule.params["n_strata"]
        e = 1.0 / (K * z)
        r = ((1.0 - eps) / (1.0 + eps)) ** e
        lower = y / (y + (1.0 - y) * r)
        upper = y * r / (y * r + (1.0 - y))
        out = np.where(x < y, lower, np.where(x > y, upper, y))
    elif kind in ("dbcd", "custom_family"):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = family_of(rule)(x, y, z)
        # D = y/x is unbounded at x in {0, 1}; the limits force the deficient arm
        if kind == "dbcd" and rule.params["nu"] > 0:
            out = np.where(x == 0, 1.0, np.where(x == 1, 0.0, out))
    else:
        raise DomainError(f"unknown rule kind {kind!r}")
    if kind != "atkinson_da":
        # the fixed point phi(x, x, z) = x holds exactly, not just up to rounding
        out = np.where(x == y, y, out)
    return float(out) if scalar else out

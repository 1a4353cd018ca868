"""Ethical weight functions omega(x) of the overall ethical risk x = E|theta|."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .design import DomainError

# keeps 1 / (1 - omega) finite when a weight saturates numerically
OMEGA_MAX = 1.0 - 1e-12

KINDS = ("constant", "s_shaped", "chi_square_cdf", "thresholded")


@dataclass(frozen=True)
class WeightSpec:
    """A weight family and its parameter.

    ``constant``: parameter is omega in [0, 1).
    ``s_shaped``: parameter is s >= 0.
    ``chi_square_cdf``: parameter is the degrees of freedom r > 0.
    ``thresholded``: parameter is the threshold; ``inner`` is applied to the
    excess risk ``x - threshold``.
    """

    kind: str
    parameter: float
    inner: WeightSpec | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown weight kind {self.kind!r}")
        a = float(self.parameter)
        if self.kind == "constant" and not 0 <= a < 1:
            raise DomainError(f"constant weight must be in [0, 1), got {a}")
        if self.kind == "s_shaped" and not a >= 0:
            raise DomainError(f"s must be >= 0, got {a}")
        if self.kind == "chi_square_cdf" and not a > 0:
            raise DomainError(f"degrees of freedom must be > 0, got {a}")
        if self.kind == "thresholded":
            if not a >= 0:
                raise DomainError(f"threshold must be >= 0, got {a}")
            if self.inner is None or self.inner.kind == "constant":
                raise DomainError("thresholded weight needs a non-constant inner weight")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "parameter": float(self.parameter)}
        if self.inner is not None:
            d["inner"] = self.inner.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> WeightSpec:
        inner = d.get("inner")
        return cls(d["kind"], float(d["parameter"]),
                   None if inner is None else cls.from_dict(inner))

    def label(self) -> str:
        if self.kind == "constant":
            return f"omega={self.parameter:g}"
        if self.kind == "s_shaped":
            return f"omega_{self.parameter:g}"
        if self.kind == "chi_square_cdf":
            return f"chi2({self.parameter:g})"
        return f"threshold({self.parameter:g}, {self.inner.label()})"


def constant(omega: float) -> WeightSpec:
    return WeightSpec("constant", omega)


def s_shaped(s: float) -> WeightSpec:
    return WeightSpec("s_shaped", s)


def chi_square_cdf(r: float) -> WeightSpec:
    return WeightSpec("chi_square_cdf", r)


def thresholded(threshold: float, inner: WeightSpec) -> WeightSpec:
    return WeightSpec("thresholded", threshold, inner)


def s_shaped_weight(x, s):
    """(1 + x^-2)^(-2(s+1)) [2 - (1 + x^-2)^-2], written via t = x^2/(1 + x^2)."""
    x = np.asarray(x, dtype=float)
    t = x * x / (1.0 + x * x)
    return t ** (2.0 * (s + 1.0)) * (2.0 - t * t)


def chi_square_weight(x, r):
    """CDF of a chi-square with r degrees of freedom: P(r/2, x/2)."""
    return special.gammainc(0.5 * r, 0.5 * np.asarray(x, dtype=float))


def weight(spec: WeightSpec, x):
    """Evaluate omega at overall risk ``x >= 0``; scalar in, float out."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(~np.isfinite(xa)):
        raise DomainError("overall risk must be a finite nonnegative number")
    if spec.kind == "constant":
        w = np.full_like(xa, spec.parameter)
    elif spec.kind == "s_shaped":
        w = s_shaped_weight(xa, spec.parameter)
    elif spec.kind == "chi_square_cdf":
        w = chi_square_weight(xa, spec.parameter)
    else:
        # omega(threshold) = 0; continuous from the right
        excess = np.maximum(xa - spec.parameter, 0.0)
        w = np.where(xa > spec.parameter, weight(spec.inner, excess), 0.0)
    w = np.minimum(w, OMEGA_MAX)
    return float(w) if w.ndim == 0 else w

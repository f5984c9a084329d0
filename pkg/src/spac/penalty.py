"""Penalty values and their closed-form univariate minimizers.

Each threshold map solves ``argmin_g 0.5 * (z - g)**2 + pen(g)`` exactly
for its penalty. The scalar versions here are the reference; the solver
uses the numba twins in :mod:`spac._kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class Family(str, Enum):
    LASSO = "lasso"
    ALASSO = "alasso"
    SCAD = "scad"


@dataclass(frozen=True, eq=False)
class PenaltySpec:
    """Penalty family and parameters.

    ``weights`` are the adaptive-Lasso weights ``1 / |g0_j| ** mu`` and must be
    given exactly when ``family`` is ``ALASSO``; ``inf`` pins a coordinate at
    zero.
    """

    family: Family
    lam: float = 0.0
    mu: float = 1.0
    a: float = 3.7
    weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.family is Family.SCAD and not self.a > 2:
            raise ValueError(f"SCAD needs a > 2, got {self.a}")
        if self.family is Family.ALASSO:
            if not self.mu > 0:
                raise ValueError(f"mu must be > 0, got {self.mu}")
            if self.weights is None:
                raise ValueError("adaptive Lasso needs weights")
            w = np.array(self.weights, dtype=float)
            if np.any(np.isnan(w)) or np.any(w < 0):
                raise ValueError("adaptive weights must be nonnegative")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        elif self.weights is not None:
            raise ValueError(f"{self.family.value} penalty takes no weights")

    def with_lambda(self, lam):
        return replace(self, lam=float(lam))


def lasso(lam=0.0):
    return PenaltySpec(Family.LASSO, lam)


def scad(lam=0.0, a=3.7):
    return PenaltySpec(Family.SCAD, lam, a=a)


def alasso(weights, lam=0.0, mu=1.0):
    return PenaltySpec(Family.ALASSO, lam, mu=mu, weights=weights)


def adaptive_weights(initial, mu=1.0):
    """``1 / |initial| ** mu`` with zeros mapped to ``inf``."""
    initial = np.abs(np.asarray(initial, dtype=float))
    with np.errstate(divide="ignore"):
        return np.where(initial > 0, 1.0 / initial ** mu, np.inf)


def scad_value(t, lam, a):
    t = abs(t)
    if t <= lam:
        return lam * t
    if t <= a * lam:
        return (a * lam * t - 0.5 * (t * t + lam * lam)) / (a - 1)
    return lam * lam * (a * a - 1) / (2 * (a - 1))


def penalty_value(spec, t, j=0):
    """Evaluate the penalty of ``spec`` at coefficient ``t`` for coordinate ``j``."""
    if spec.family is Family.LASSO:
        return spec.lam * abs(t)
    if spec.family is Family.ALASSO:
        w = spec.weights[j]
        if math.isinf(w):
            return 0.0 if t == 0 else math.inf
        return spec.lam * w * abs(t)
    return scad_value(t, spec.lam, spec.a)


def soft_threshold(z, t):
    if abs(z) <= t:
        return 0.0
    return math.copysign(abs(z) - t, z)


def adaptive_threshold(z, lam, w):
    if math.isinf(w):
        return 0.0
    return soft_threshold(z, lam * w)


def scad_threshold(z, lam, a):
    az = abs(z)
    if az <= 2 * lam:
        return soft_threshold(z, lam)
    if az <= a * lam:
        return ((a - 1) * z - math.copysign(a * lam, z)) / (a - 2)
    return z

"""Base measures ``H`` and the tail moments the posterior is built from.

For ``q`` on either side of zero the tail moment of order ``nu`` is

    m^(nu)(q) = int_{|q|}^inf X^-nu H(dX) = int_-inf^{-|q|} (-X)^-nu H(dX),

which relies on ``H`` being symmetric about zero.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

LOG2 = math.log(2.0)


class BaseMeasure(ABC):
    """Symmetric non-atomic shape distribution on the real line."""

    @abstractmethod
    def density(self, x):
        """Lebesgue density of ``H``."""

    @abstractmethod
    def log_tail_moment(self, nu, q):
        """``log m^(nu)(q)``; broadcasts over array ``nu`` / ``q``."""

    def log_tail_moment_integral(self, nu, x0):
        """``log int_{x0}^inf m^(nu)(x) dx`` for ``x0 >= 0``.

        Uses ``int_{x0}^inf m^(nu) = m^(nu-1)(x0) - x0 m^(nu)(x0)`` where the
        tail moments here are exact integrals over ``X > x0``.
        """
        nu = np.asarray(nu)
        x0 = np.asarray(x0, dtype=float)
        lo = np.exp(self.log_tail_moment(nu - 1, x0))
        hi = x0 * np.exp(self.log_tail_moment(nu, x0))
        return np.log(lo - hi)


@dataclass(frozen=True)
class ParetoMixture(BaseMeasure):
    """Two Pareto(alpha, delta) halves reflected about zero, each of mass 1/2."""

    alpha: float = 1e-6
    delta: float = 1e-6

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"pareto-alpha must be > 0, got {self.alpha}")
        if not self.delta > 0:
            raise ValueError(f"pareto-delta must be > 0, got {self.delta}")

    @property
    def log_scale(self) -> float:
        """``log(alpha delta^alpha / 2)``."""
        return math.log(self.alpha) + self.alpha * math.log(self.delta) - LOG2

    def density(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        with np.errstate(divide="ignore"):
            val = np.exp(self.log_scale - (self.alpha + 1.0) * np.log(ax))
        return np.where(ax > self.delta, val, 0.0)

    def log_tail_moment(self, nu, q):
        nu = np.asarray(nu, dtype=float)
        lq = np.log(np.maximum(np.abs(np.asarray(q, dtype=float)), self.delta))
        out = self.log_scale - np.log(self.alpha + nu) - (self.alpha + nu) * lq
        return out if out.ndim else float(out)

    def log_tail_moment_integral(self, nu, x0):
        nu = np.asarray(nu, dtype=float)
        x0 = np.asarray(x0, dtype=float)
        p = self.alpha + nu
        # closed form beyond delta; the flat stretch (x0, delta) is added exactly
        beyond = self.log_scale - np.log(p) - np.log(p - 1.0) - (p - 1.0) * math.log(self.delta)
        flat = self.log_tail_moment(nu, self.delta) + np.log(np.maximum(self.delta - x0, 0.0) + 1e-300)
        inside = np.logaddexp(beyond, flat)
        lx = np.log(np.maximum(x0, self.delta))
        outside = self.log_scale - np.log(p) - np.log(p - 1.0) - (p - 1.0) * lx
        out = np.where(x0 < self.delta, inside, outside)
        return out if out.ndim else float(out)


def log_d_plus(base: BaseMeasure, nu: int, y: float | None, t_shift):
    """Log of the positive-side density kernel term at ``t - theta = t_shift``.

    ``nu = 0`` is the prior term ``int_{t-theta}^inf X^-1 H(dX)`` (``y`` is
    ignored).  For ``nu >= 1`` it is the ratio
    ``m^(nu+1)(max(t-theta, y)) / m^(nu)(y)`` of a cluster of size ``nu``
    whose largest member sits at ``y``.
    """
    t_shift = np.asarray(t_shift, dtype=float)
    if nu == 0:
        return base.log_tail_moment(1, t_shift)
    y = abs(y)
    return base.log_tail_moment(nu + 1, np.maximum(t_shift, y)) - base.log_tail_moment(nu, y)


def log_d_minus(base: BaseMeasure, nu: int, z: float | None, t_shift):
    """Mirror of :func:`log_d_plus` for ``t < theta``; ``z < 0`` and ``t_shift < 0``."""
    return log_d_plus(base, nu, None if z is None else abs(z), -np.asarray(t_shift, dtype=float))

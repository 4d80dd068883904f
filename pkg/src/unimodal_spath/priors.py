"""Priors for the mode and proposal densities for drawing it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class UniformPrior:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"uniform prior needs lo < hi, got [{self.lo}, {self.hi}]")

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        inside = (theta >= self.lo) & (theta <= self.hi)
        out = np.where(inside, -math.log(self.hi - self.lo), -np.inf)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.lo, self.hi))

    @property
    def support(self) -> tuple[float, float]:
        return self.lo, self.hi


@dataclass(frozen=True)
class PointMassPrior:
    """Degenerate prior; only meaningful for the exact engine."""

    value: float

    @property
    def support(self) -> tuple[float, float]:
        return self.value, self.value


@dataclass(frozen=True)
class NormalDensity:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"normal sigma must be > 0, got {self.sigma}")

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        z = (theta - self.mu) / self.sigma
        out = -0.5 * z * z - math.log(self.sigma) - LOG_SQRT_2PI
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.normal(self.mu, self.sigma))


def default_prior(observations, width: float | None = None) -> UniformPrior:
    """Uniform on ``[min T - s, max T + s]``; ``s`` defaults to the sample SD."""
    t = np.asarray(observations, dtype=float)
    s = float(np.std(t, ddof=1)) if width is None and t.size > 1 else (width or 1.0)
    return UniformPrior(float(t.min()) - s, float(t.max()) + s)


def default_rho(observations, sigma: float = 0.25) -> NormalDensity:
    return NormalDensity(float(np.median(observations)), sigma)


def parse_rho(spec: str):
    """Parse ``normal:MU,SIGMA`` or ``uniform:LO,HI``."""
    kind, _, args = spec.partition(":")
    try:
        a, b = (float(x) for x in args.split(","))
    except ValueError:
        raise ValueError(f"malformed rho spec {spec!r}; expected normal:MU,SIGMA or uniform:LO,HI") from None
    kind = kind.strip().lower()
    if kind == "normal":
        return NormalDensity(a, b)
    if kind == "uniform":
        return UniformPrior(a, b)
    raise ValueError(f"unknown rho family {kind!r}")

"""Exchangeable partition probability functions for species sampling priors.

:class:`SpeciesModel` is the interface the posterior and sampler code talk
to.  Everything is carried in natural-log scale.  :class:`PoissonDirichlet`
is the two-parameter Poisson-Dirichlet (Pitman-Yor) instance; ``a = 0``
gives the Dirichlet process with total mass ``b``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .paths import SPath


class SpeciesModel(ABC):
    """Symmetric EPPF ``chi`` evaluated on multisets of cluster sizes.

    Subclasses must implement :meth:`log_chi`.  The remaining methods have
    generic definitions in terms of ``log_chi`` ratios which product-form
    models override with closed forms.
    """

    #: the conditional ratio ``chi(plus, minus) / chi(plus)`` is a symmetric
    #: function of ``minus`` (required to draw the second path by SIP)
    symmetric_conditional: bool = True

    #: ``chi`` factorises as a function of the number of clusters times a
    #: product of per-cell weights; enables the O(1) local sampler updates
    product_form: bool = False

    @abstractmethod
    def log_chi(self, sizes: Sequence[int]) -> float:
        """Log EPPF of a partition with the given cell sizes."""

    def log_chi_conditional(self, given: Sequence[int], sizes: Sequence[int]) -> float:
        """Log of ``chi(given, sizes) / chi(given)``."""
        return self.log_chi(tuple(given) + tuple(sizes)) - self.log_chi(given)

    def predictive_weights(self, sizes: Sequence[int]) -> tuple[float, np.ndarray]:
        """Prediction-rule weights ``(l_0, [l_1..l_K])`` after ``sum(sizes)`` draws."""
        sizes = list(sizes)
        base = self.log_chi(sizes)
        l0 = math.exp(self.log_chi(sizes + [1]) - base)
        lj = np.empty(len(sizes))
        for j in range(len(sizes)):
            bumped = sizes.copy()
            bumped[j] += 1
            lj[j] = math.exp(self.log_chi(bumped) - base)
        return l0, lj

    def eta_weights(self, s_plus: SPath, s_minus: SPath) -> tuple[float, np.ndarray, np.ndarray]:
        """New-cluster and per-jump predictive weights for a path pair.

        Returns ``(eta0, eta_plus, eta_minus)`` with ``eta_plus[j-1]`` the
        weight at location ``j`` of ``s_plus`` (zero off the jump set).
        """
        plus = list(s_plus.increments)
        minus = list(s_minus.increments)
        base = self.log_chi(plus + minus)
        eta0 = math.exp(self.log_chi(plus + minus + [1]) - base)
        eta_plus = np.zeros(s_plus.n)
        for idx, (j, d) in enumerate(s_plus.jumps):
            bumped = plus.copy()
            bumped[idx] = d + 1
            eta_plus[j - 1] = math.exp(self.log_chi(bumped + minus) - base)
        eta_minus = np.zeros(s_minus.n)
        for idx, (j, d) in enumerate(s_minus.jumps):
            bumped = minus.copy()
            bumped[idx] = d + 1
            eta_minus[j - 1] = math.exp(self.log_chi(plus + bumped) - base)
        return eta0, eta_plus, eta_minus


@dataclass(frozen=True)
class PoissonDirichlet(SpeciesModel):
    """Two-parameter Poisson-Dirichlet process with discount ``a`` and strength ``b``."""

    a: float = 0.0
    b: float = 1.0

    product_form = True

    def __post_init__(self):
        if not (0.0 <= self.a < 1.0):
            raise ValueError(f"pd-a must satisfy 0 <= a < 1, got {self.a}")
        if not (self.b > -self.a):
            raise ValueError(f"pd-b must satisfy b > -a, got b={self.b}, a={self.a}")

    # The leading factor b of prod_{i<=K}[b + (i-1)a] cancels against the
    # leading factor b of prod_{k<=n}(b + k - 1); it is dropped from both so
    # every remaining factor is positive also when -a < b <= 0.

    def _log_rising_clusters(self, start: int, stop: int) -> float:
        """``sum_{m=start}^{stop-1} log(b + m a)`` with ``start >= 1``."""
        count = stop - start
        if count <= 0:
            return 0.0
        if self.a == 0.0:
            return count * math.log(self.b)
        r = self.b / self.a
        return count * math.log(self.a) + math.lgamma(r + stop) - math.lgamma(r + start)

    def _log_rising_denominator(self, start: int, stop: int) -> float:
        """``sum_{k=start}^{stop-1} log(b + k)`` with ``start >= 1``."""
        if stop <= start:
            return 0.0
        return math.lgamma(self.b + stop) - math.lgamma(self.b + start)

    def log_cell_weight(self, e: int) -> float:
        """``log prod_{i=1}^{e-1} (i - a)``."""
        return math.lgamma(e - self.a) - math.lgamma(1.0 - self.a)

    def _check_sizes(self, sizes: Sequence[int]) -> None:
        for e in sizes:
            if e < 1:
                raise ValueError(f"cell sizes must be >= 1, got {e}")

    def log_chi(self, sizes: Sequence[int]) -> float:
        self._check_sizes(sizes)
        K = len(sizes)
        if K == 0:
            return 0.0
        n = sum(sizes)
        out = self._log_rising_clusters(1, K)
        out += sum(self.log_cell_weight(e) for e in sizes)
        out -= self._log_rising_denominator(1, n)
        return out

    def log_chi_conditional(self, given: Sequence[int], sizes: Sequence[int]) -> float:
        self._check_sizes(given)
        self._check_sizes(sizes)
        if len(given) == 0:
            return self.log_chi(sizes)
        k_given, n_given = len(given), sum(given)
        out = self._log_rising_clusters(k_given, k_given + len(sizes))
        out += sum(self.log_cell_weight(e) for e in sizes)
        out -= self._log_rising_denominator(n_given, n_given + sum(sizes))
        return out

    def predictive_weights(self, sizes: Sequence[int]) -> tuple[float, np.ndarray]:
        k = sum(sizes)
        denom = self.b + k
        l0 = (self.b + len(sizes) * self.a) / denom
        return l0, (np.asarray(sizes, dtype=float) - self.a) / denom

    def eta_weights(self, s_plus: SPath, s_minus: SPath) -> tuple[float, np.ndarray, np.ndarray]:
        N = s_plus.n + s_minus.n
        denom = self.b + N
        K = s_plus.n_jumps + s_minus.n_jumps
        eta0 = (self.b + K * self.a) / denom
        eta_plus = np.zeros(s_plus.n)
        for j, d in s_plus.jumps:
            eta_plus[j - 1] = (d - self.a) / denom
        eta_minus = np.zeros(s_minus.n)
        for j, d in s_minus.jumps:
            eta_minus[j - 1] = (d - self.a) / denom
        return eta0, eta_plus, eta_minus

    # -- product-form hooks used by the samplers -------------------------

    def cell_log_weights(self, size: int) -> np.ndarray:
        """Table ``t[e] = log_cell_weight(e)`` for ``e = 0..size`` (``t[0]`` unused)."""
        from scipy.special import gammaln

        e = np.arange(size + 1, dtype=float)
        out = gammaln(np.maximum(e, 1.0) - self.a) - math.lgamma(1.0 - self.a)
        out[0] = 0.0
        return out

    def new_cluster_log_weights(self, size: int) -> np.ndarray:
        """Table ``t[m] = log(b + m a)``: factor for opening cluster number ``m + 1``.

        ``t[0]`` is 0 because the first cluster's factor cancels.
        """
        m = np.arange(size + 1, dtype=float)
        out = np.zeros(size + 1)
        out[1:] = np.log(self.b + m[1:] * self.a)
        return out


def chinese_restaurant_log_prob(model: SpeciesModel, labels: Sequence[int]) -> float:
    """Log probability of a sequential table assignment via the prediction rule.

    ``labels[i]`` is the table of customer ``i``; a label equal to the
    current number of tables opens a new one.
    """
    sizes: list[int] = []
    out = 0.0
    for idx, lab in enumerate(labels):
        if idx == 0:
            if lab != 0:
                raise ValueError("first customer must sit at table 0")
            sizes.append(1)
            continue
        l0, lj = model.predictive_weights(sizes)
        if lab == len(sizes):
            out += math.log(l0)
            sizes.append(1)
        else:
            out += math.log(lj[lab])
            sizes[lab] += 1
    return out

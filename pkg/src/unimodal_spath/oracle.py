"""Brute-force partition-level posterior, used as ground truth for small samples.

Given the mode, the latent partition ``p`` of the observations has posterior

    pi(p | theta, T) ~ chi(sizes of p) * prod_cells int U^-e H(dU) over U beyond the cell,

with cells mixing signs having zero mass.  Positive observations are indexed
``1..n`` in ascending order of ``Y``, negative ones ``1..N-n`` in ascending
order of ``|Z|``, so that a cell's extreme element is its largest index.
The partition posterior and density never touch path enumeration; only the
Rao-Blackwell comparison calls the path engine.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .paths import (
    DEFAULT_PARTITION_CAP,
    Partition,
    SPath,
    count_corresponding_partitions,
    enumerate_partitions,
    path_of_partition,
)
from .posterior import CenteredData, DensityGrid, a_f, exact_joint


@dataclass(frozen=True)
class SplitPartition:
    p_plus: Partition
    p_minus: Partition

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.p_plus.sizes + self.p_minus.sizes

    @property
    def path_pair(self) -> tuple[SPath, SPath]:
        return path_of_partition(self.p_plus), path_of_partition(self.p_minus)


def log_varphi_integral(base, cell, side: int, data: CenteredData) -> float:
    """``log int U^-e H(dU)`` over ``U`` beyond every member of ``cell``.

    ``cell`` holds signed 1-based indices (``+j`` is ``Y_j``, ``-j`` is
    ``Z_j``); ``side`` is the sign expected of them.  A cell mixing signs
    gets ``-inf``.
    """
    cell = tuple(cell)
    if not cell:
        raise ValueError("cell must be non-empty")
    if any((c > 0) != (side > 0) for c in cell):
        return -math.inf
    if side > 0:
        edge = max(data.y[c - 1] for c in cell)
    else:
        edge = max(-data.z[-c - 1] for c in cell)
    return float(base.log_tail_moment(len(cell), edge))


@dataclass
class PartitionTable:
    partitions: list[SplitPartition]
    log_weight: np.ndarray
    probs: np.ndarray


def exact_partition_posterior(model, base, data: CenteredData, cap: int = DEFAULT_PARTITION_CAP) -> PartitionTable:
    """Normalised posterior over all single-signed split partitions."""
    if data.likelihood_zero:
        raise ValueError(f"{data.zero_gaps} observation(s) coincide with theta; likelihood is zero")
    n, m = data.n, data.N - data.n
    if data.N > cap:
        from .paths import EnumerationCapError

        raise EnumerationCapError(f"partition oracle for N={data.N} exceeds cap {cap}")
    plus = [(p, sum(log_varphi_integral(base, c, 1, data) for c in p.cells)) for p in enumerate_partitions(n, cap)]
    minus = [
        (p, sum(log_varphi_integral(base, tuple(-x for x in c), -1, data) for c in p.cells))
        for p in enumerate_partitions(m, cap)
    ]
    parts, logs = [], []
    for pp, lp in plus:
        for pm, lm in minus:
            sp = SplitPartition(pp, pm)
            parts.append(sp)
            logs.append(model.log_chi(sp.sizes) + lp + lm)
    logs = np.asarray(logs)
    return PartitionTable(parts, logs, np.exp(logs - logsumexp(logs)))


def partition_density_terms(model, base, data: CenteredData, sp: SplitPartition, t) -> np.ndarray:
    """Predictive density of the next observation given the partition.

    Each cluster's shape ``X*`` has posterior ``U^-e H(dU)`` beyond its cell,
    so the uniform kernel ``1/X`` on ``(theta, theta + X)`` averages to
    ``m^(e+1)(max(x, edge)) / m^(e)(edge)`` at distance ``x``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = t - data.theta
    pos = x >= 0
    ax = np.abs(x)
    l0, lk = model.predictive_weights(sp.sizes)
    out = l0 * np.exp(base.log_tail_moment(1, ax))
    cells = [(c, 1) for c in sp.p_plus.cells] + [(c, -1) for c in sp.p_minus.cells]
    for (cell, side), w in zip(cells, lk):
        e = len(cell)
        edge = max(data.y[c - 1] for c in cell) if side > 0 else max(-data.z[c - 1] for c in cell)
        val = np.exp(base.log_tail_moment(e + 1, np.maximum(ax, edge)) - base.log_tail_moment(e, edge))
        out = out + np.where(pos == (side > 0), w * val, 0.0)
    return out


def _latent_variance_terms(model, base, data, sp, t) -> np.ndarray:
    """``sum_k l_k^2 Var(K(t | X*_k))`` given the partition."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = t - data.theta
    pos = x >= 0
    ax = np.abs(x)
    _, lk = model.predictive_weights(sp.sizes)
    out = np.zeros_like(t)
    cells = [(c, 1) for c in sp.p_plus.cells] + [(c, -1) for c in sp.p_minus.cells]
    for (cell, side), w in zip(cells, lk):
        e = len(cell)
        edge = max(data.y[c - 1] for c in cell) if side > 0 else max(-data.z[c - 1] for c in cell)
        ln = base.log_tail_moment(e, edge)
        m1 = np.exp(base.log_tail_moment(e + 1, np.maximum(ax, edge)) - ln)
        m2 = np.exp(base.log_tail_moment(e + 2, np.maximum(ax, edge)) - ln)
        out = out + np.where(pos == (side > 0), w * w * (m2 - m1 * m1), 0.0)
    return out


def exact_density(model, base, data: CenteredData, grid, cap: int = DEFAULT_PARTITION_CAP) -> DensityGrid:
    table = exact_partition_posterior(model, base, data, cap)
    grid = np.asarray(grid, dtype=float)
    est = np.zeros_like(grid)
    for sp, p in zip(table.partitions, table.probs):
        est += p * partition_density_terms(model, base, data, sp, grid)
    return DensityGrid(grid, est)


def grouped_by_paths(table: PartitionTable) -> dict:
    """Posterior mass of each ``(S+, S-)`` pair, summed over its partitions."""
    out: dict = defaultdict(float)
    for sp, p in zip(table.partitions, table.probs):
        out[sp.path_pair] += p
    return dict(out)


def conditional_uniformity_check(model, base, data: CenteredData, cap: int = DEFAULT_PARTITION_CAP) -> float:
    """Largest ``|pi(p | S-, S+) - 1/(|C_S+| |C_S-|)|`` over all partitions."""
    table = exact_partition_posterior(model, base, data, cap)
    mass = grouped_by_paths(table)
    worst = 0.0
    for sp, p in zip(table.partitions, table.probs):
        s_plus, s_minus = sp.path_pair
        size = count_corresponding_partitions(s_plus) * count_corresponding_partitions(s_minus)
        worst = max(worst, abs(p / mass[(s_plus, s_minus)] - 1.0 / size))
    return worst


@dataclass
class RaoBlackwellReport:
    t: np.ndarray
    mean: np.ndarray
    var_paths: np.ndarray
    var_partitions: np.ndarray
    var_latent: np.ndarray


def rao_blackwell_variances(model, base, data: CenteredData, grid, cap: int = DEFAULT_PARTITION_CAP) -> RaoBlackwellReport:
    """Exact posterior variances of three nested estimands at each ``t``.

    ``var_paths`` is the variance over path pairs of the path kernel ``a_f``
    (computed with the path engine); ``var_partitions`` that of
    the partition-level predictive density; ``var_latent`` that of the
    predictive density given the partition and every cluster's shape.
    """
    table = exact_partition_posterior(model, base, data, cap)
    grid = np.asarray(grid, dtype=float)
    vals = np.array([partition_density_terms(model, base, data, sp, grid) for sp in table.partitions])
    lat = np.array([_latent_variance_terms(model, base, data, sp, grid) for sp in table.partitions])
    pr = table.probs
    mean = pr @ vals
    var_part = pr @ (vals - mean) ** 2
    var_lat = var_part + pr @ lat
    joint = exact_joint(model, base, data)
    af = np.array([a_f(model, base, data, pair, grid) for pair in joint.pairs])
    var_path = joint.probs @ (af - joint.probs @ af) ** 2
    return RaoBlackwellReport(grid, mean, var_path, var_part, var_lat)

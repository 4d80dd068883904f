"""Exact path-based posterior for the unimodal species sampling mixture.

Given the mode ``theta`` the observations split into positive gaps ``Y``
(ascending) and negative gaps ``Z`` (``Z_1`` closest to zero).  The
posterior of the two S-paths is ``pi(S-, S+) ~ phi+(S+) phi-(S- | S+)`` and
the posterior mean density is the ``pi``-average of the closed-form kernel
``a_f``.  Every sum over paths is enumerated here, so this module is only
for small samples; the samplers module handles realistic sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .base_measure import BaseMeasure
from .paths import (
    DEFAULT_PATH_CAP,
    SPath,
    enumerate_paths,
    log_count_corresponding_partitions,
)
from .priors import PointMassPrior, UniformPrior
from .species import SpeciesModel


@dataclass(frozen=True)
class CenteredData:
    theta: float
    y: np.ndarray
    z: np.ndarray
    zero_gaps: int = 0

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def N(self) -> int:
        return len(self.y) + len(self.z)

    @property
    def likelihood_zero(self) -> bool:
        """An observation sits exactly at the mode, where every kernel vanishes."""
        return self.zero_gaps > 0


def center(observations: Sequence[float], theta: float) -> CenteredData:
    t = np.sort(np.asarray(observations, dtype=float), kind="stable")
    if t.size == 0:
        raise ValueError("need at least one observation")
    return center_sorted(t, theta)


def center_sorted(sorted_obs: np.ndarray, theta: float) -> CenteredData:
    lo = int(np.searchsorted(sorted_obs, theta, side="left"))
    hi = int(np.searchsorted(sorted_obs, theta, side="right"))
    y = sorted_obs[hi:] - theta
    z = sorted_obs[:lo][::-1] - theta
    return CenteredData(float(theta), y, z, hi - lo)


@dataclass(frozen=True)
class PathPair:
    s_plus: SPath
    s_minus: SPath


@lru_cache(maxsize=64)
def _paths(n: int, cap: int) -> tuple[SPath, ...]:
    return tuple(enumerate_paths(n, cap))


def log_phi_path(
    model: SpeciesModel,
    base: BaseMeasure,
    q_abs: np.ndarray,
    path: SPath,
    context: Sequence[int] = (),
) -> float:
    """``log |C_S| + log chi(...) + sum_jumps log m^(dS_j)(Q_j)``.

    With a non-empty ``context`` (the other path's increments) the EPPF
    factor is the conditional ratio ``chi(context, M(S)) / chi(context)``.
    """
    if path.n != len(q_abs):
        raise ValueError(f"path over n={path.n} but {len(q_abs)} cutoffs")
    if path.n == 0:
        return 0.0
    jumps = path.jumps
    incs = [d for _, d in jumps]
    out = log_count_corresponding_partitions(path)
    out += model.log_chi_conditional(context, incs) if context else model.log_chi(incs)
    if jumps:
        nu = np.fromiter((d for _, d in jumps), float, len(jumps))
        q = np.fromiter((q_abs[j - 1] for j, _ in jumps), float, len(jumps))
        out += float(np.sum(base.log_tail_moment(nu, q)))
    return out


def log_phi_plus(model, base, data: CenteredData, s_plus: SPath) -> float:
    return log_phi_path(model, base, data.y, s_plus)


def log_phi_minus(model, base, data: CenteredData, s_minus: SPath, s_plus: SPath) -> float:
    return log_phi_path(model, base, np.abs(data.z), s_minus, s_plus.increments)


@dataclass
class JointTable:
    pairs: list[PathPair]
    log_phi: np.ndarray
    probs: np.ndarray
    log_normalizer: float


def exact_joint(model, base, data: CenteredData, cap: int = DEFAULT_PATH_CAP) -> JointTable:
    """Normalised ``pi(S-, S+ | theta, T)`` over every pair of paths."""
    if data.likelihood_zero:
        raise ValueError(f"{data.zero_gaps} observation(s) coincide with theta; likelihood is zero")
    pairs, logs = [], []
    zabs = np.abs(data.z)
    minus_paths = _paths(data.N - data.n, cap)
    for sp in _paths(data.n, cap):
        lp = log_phi_path(model, base, data.y, sp)
        ctx = sp.increments
        for sm in minus_paths:
            pairs.append(PathPair(sp, sm))
            logs.append(lp + log_phi_path(model, base, zabs, sm, ctx))
    logs = np.asarray(logs)
    lz = float(logsumexp(logs))
    return JointTable(pairs, logs, np.exp(logs - lz), lz)


# -- density kernel -----------------------------------------------------


@dataclass
class KernelMixture:
    """Non-negative combination of the tail-ratio kernels making up ``a_f``.

    Each term is ``(theta, side, nu, cut)`` with weight ``coef``:
    ``nu = 0`` is the prior kernel ``m^(1)(|t - theta|)`` on ``side``;
    ``nu >= 1`` is ``m^(nu+1)(max(|t - theta|, cut)) / m^(nu)(cut)``.
    Terms with equal keys are merged.
    """

    base: BaseMeasure
    terms: dict = field(default_factory=dict)

    def add(self, theta: float, side: int, nu: int, cut: float, coef: float) -> None:
        if coef == 0.0:
            return
        key = (float(theta), int(side), int(nu), float(cut))
        self.terms[key] = self.terms.get(key, 0.0) + coef

    def add_pair(self, model, data: CenteredData, pair: PathPair, weight: float = 1.0) -> None:
        eta0, eta_p, eta_m = model.eta_weights(pair.s_plus, pair.s_minus)
        th = data.theta
        self.add(th, 1, 0, 0.0, weight * eta0)
        self.add(th, -1, 0, 0.0, weight * eta0)
        for j, d in pair.s_plus.jumps:
            self.add(th, 1, d, data.y[j - 1], weight * eta_p[j - 1])
        for j, d in pair.s_minus.jumps:
            self.add(th, -1, d, -data.z[j - 1], weight * eta_m[j - 1])

    def _arrays(self):
        keys = list(self.terms)
        th = np.array([k[0] for k in keys])
        side = np.array([k[1] for k in keys])
        nu = np.array([k[2] for k in keys], dtype=float)
        cut = np.array([k[3] for k in keys])
        coef = np.array([self.terms[k] for k in keys])
        return th, side, nu, cut, coef

    def __call__(self, t, left_limit: bool = False, chunk: int = 4096) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t.shape)
        if not self.terms:
            return out
        th, side, nu, cut, coef = self._arrays()
        lt = self.base.log_tail_moment
        # normalising log m^(nu)(cut) per term; prior terms have none
        norm = np.where(nu > 0, lt(np.maximum(nu, 1.0), np.where(nu > 0, cut, 1.0)), 0.0)
        for s in range(0, len(th), chunk):
            sl = slice(s, s + chunk)
            x = t[None, :] - th[sl, None]
            sd = side[sl, None]
            if left_limit:
                active = ((sd > 0) & (x > 0)) | ((sd < 0) & (x <= 0))
            else:
                active = ((sd > 0) & (x >= 0)) | ((sd < 0) & (x < 0))
            ax = np.maximum(np.abs(x), cut[sl, None])
            val = lt(nu[sl, None] + 1.0, ax) - norm[sl, None]
            out += np.sum(np.where(active, coef[sl, None] * np.exp(val), 0.0), axis=0)
        return out

    def tail_mass(self, lo: float, hi: float) -> float:
        """Closed-form mass outside ``[lo, hi]`` (which must contain every theta)."""
        if not self.terms:
            return 0.0
        th, side, nu, cut, coef = self._arrays()
        x0 = np.where(side > 0, hi - th, th - lo)
        if np.any(x0 < 0):
            raise ValueError("tail_mass bounds must bracket every mode")
        return float(np.sum(coef * self._mass_beyond(nu, cut, x0)))

    def total_mass(self) -> float:
        th, side, nu, cut, coef = self._arrays()
        return float(np.sum(coef * self._mass_beyond(nu, cut, np.zeros_like(th))))

    def _mass_beyond(self, nu, cut, x0):
        """``int_{x0}^inf`` of each normalised kernel term (``x`` = distance from theta)."""
        b = self.base
        cut_eff = np.where(nu > 0, cut, 0.0)
        flat = np.maximum(cut_eff - x0, 0.0) * np.exp(b.log_tail_moment(nu + 1.0, np.maximum(cut_eff, 1e-300)))
        rest = np.exp(b.log_tail_moment_integral(nu + 1.0, np.maximum(x0, cut_eff)))
        norm = np.where(nu > 0, np.exp(b.log_tail_moment(np.maximum(nu, 1.0), np.where(nu > 0, cut, 1.0))), 1.0)
        return (flat + rest) / norm


def af_kernel(model, base, data: CenteredData, pair: PathPair) -> KernelMixture:
    km = KernelMixture(base)
    km.add_pair(model, data, pair)
    return km


def a_f(model, base, data: CenteredData, pair: PathPair, t, left_limit: bool = False):
    """Posterior-mean density kernel of one path pair; right limit at ``t = theta``."""
    scalar = np.ndim(t) == 0
    out = af_kernel(model, base, data, pair)(t, left_limit=left_limit)
    return float(out[0]) if scalar else out


@dataclass
class DensityGrid:
    t: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray | None = None

    def integral(self) -> float:
        return float(np.trapezoid(self.estimate, self.t))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("t,estimate\n")
            for a, b in zip(self.t, self.estimate):
                fh.write(f"{float(a)!r},{float(b)!r}\n")


def posterior_kernel_given_theta(model, base, data: CenteredData, cap: int = DEFAULT_PATH_CAP) -> KernelMixture:
    joint = exact_joint(model, base, data, cap)
    km = KernelMixture(base)
    for pair, p in zip(joint.pairs, joint.probs):
        km.add_pair(model, data, pair, p)
    return km


def exact_density_given_theta(model, base, data: CenteredData, grid, cap: int = DEFAULT_PATH_CAP) -> DensityGrid:
    grid = np.asarray(grid, dtype=float)
    km = posterior_kernel_given_theta(model, base, data, cap)
    return DensityGrid(grid, km(grid))


def log_theta_integrand(model, base, observations, theta: float, pair: PathPair, prior) -> float:
    """Unnormalised log joint density of ``(S-, S+, theta)`` given the data."""
    lp = prior.log_density(theta)
    if not np.isfinite(lp):
        return -math.inf
    data = center(observations, theta)
    if data.likelihood_zero:
        return -math.inf
    if pair.s_plus.n != data.n or pair.s_minus.n != data.N - data.n:
        raise ValueError("path pair does not match the split induced by theta")
    return log_phi_plus(model, base, data, pair.s_plus) + log_phi_minus(model, base, data, pair.s_minus, pair.s_plus) + lp


# -- unknown mode: deterministic integration over theta -----------------


def theta_nodes(theta_grid, observations, t_grid=(), base: BaseMeasure | None = None, refine: bool = True) -> np.ndarray:
    """Integration nodes for theta.

    Nodes equal to an observation are jittered off it.  With ``refine`` the
    points where the integrand jumps or kinks (observations, ``t`` values and
    their offsets by the base measure's gap ``delta``) are added so the
    trapezoid rule does not straddle them.
    """
    g = np.asarray(theta_grid, dtype=float)
    lo, hi = float(g.min()), float(g.max())
    obs = np.unique(np.asarray(observations, dtype=float))
    scale = max(1.0, float(np.max(np.abs(obs))), abs(lo), abs(hi))
    eps = 1e-9 * scale
    nodes = [g]
    if refine:
        extra = [obs - eps, obs + eps]
        t_arr = np.asarray(t_grid, dtype=float)
        extra += [t_arr, t_arr + eps]
        delta = getattr(base, "delta", None)
        if delta is not None:
            extra += [obs - delta, obs + delta, t_arr - delta, t_arr + delta]
        nodes += extra
    nodes = np.unique(np.concatenate(nodes))
    nodes = nodes[(nodes >= lo) & (nodes <= hi)]
    hit = np.isin(nodes, obs)
    nodes[hit] += eps
    return np.unique(nodes)


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def _theta_sweep(model, base, observations, nodes: np.ndarray, t_grid: np.ndarray, cap: int):
    """Per node: log sum_pairs phi+ phi- and the conditional density on ``t_grid``."""
    obs = np.sort(np.asarray(observations, dtype=float))
    N = obs.size
    K, G = nodes.size, t_grid.size
    log_mass = np.full(K, -np.inf)
    dens = np.zeros((K, G))
    left = np.searchsorted(obs, nodes, side="left")
    right = np.searchsorted(obs, nodes, side="right")
    ok = left == right
    lt = base.log_tail_moment
    for split in np.unique(left[ok]):
        idx = np.flatnonzero(ok & (left == split))
        th = nodes[idx]
        n = N - int(split)
        Y = obs[N - n:][None, :] - th[:, None]
        Zabs = th[:, None] - obs[: N - n][::-1][None, :]
        x = t_grid[None, :] - th[:, None]
        right_side = x >= 0
        ax = np.abs(x)
        prior_kernel = np.exp(lt(1.0, ax))
        run_max = np.full(idx.size, -np.inf)
        run_sum = np.zeros(idx.size)
        acc = np.zeros((idx.size, G))
        for sp in _paths(n, cap):
            lc_p = log_count_corresponding_partitions(sp)
            lm_p = np.zeros(idx.size)
            for j, d in sp.jumps:
                lm_p += lt(float(d), Y[:, j - 1])
            for sm in _paths(N - n, cap):
                lphi = lc_p + log_count_corresponding_partitions(sm) + model.log_chi(sp.increments + sm.increments) + lm_p
                for j, d in sm.jumps:
                    lphi = lphi + lt(float(d), Zabs[:, j - 1])
                eta0, eta_p, eta_m = model.eta_weights(sp, sm)
                af = eta0 * prior_kernel
                for j, d in sp.jumps:
                    cut = Y[:, j - 1][:, None]
                    term = np.exp(lt(d + 1.0, np.maximum(ax, cut)) - lt(float(d), cut))
                    af = af + np.where(right_side, eta_p[j - 1] * term, 0.0)
                for j, d in sm.jumps:
                    cut = Zabs[:, j - 1][:, None]
                    term = np.exp(lt(d + 1.0, np.maximum(ax, cut)) - lt(float(d), cut))
                    af = af + np.where(right_side, 0.0, eta_m[j - 1] * term)
                new_max = np.maximum(run_max, lphi)
                scale_old = np.exp(run_max - new_max)
                scale_new = np.exp(lphi - new_max)
                run_sum = run_sum * scale_old + scale_new
                acc = acc * scale_old[:, None] + scale_new[:, None] * af
                run_max = new_max
        log_mass[idx] = run_max + np.log(run_sum)
        dens[idx] = acc / run_sum[:, None]
    return log_mass, dens


@dataclass
class ThetaPosterior:
    nodes: np.ndarray
    density: np.ndarray
    mean: float


def exact_theta_posterior(model, base, observations, prior: UniformPrior, theta_grid, cap: int = DEFAULT_PATH_CAP) -> ThetaPosterior:
    nodes = theta_nodes(theta_grid, observations, (), base)
    log_mass, _ = _theta_sweep(model, base, observations, nodes, np.zeros(1), cap)
    log_mass = log_mass + prior.log_density(nodes)
    w = np.exp(log_mass - np.max(log_mass))
    z = float(np.sum(_trapezoid_weights(nodes) * w))
    dens = w / z
    mean = float(np.sum(_trapezoid_weights(nodes) * dens * nodes))
    return ThetaPosterior(nodes, dens, mean)


def exact_density_unknown_theta(
    model,
    base,
    observations,
    prior,
    theta_grid,
    t_grid,
    cap: int = DEFAULT_PATH_CAP,
    refine: bool = True,
) -> DensityGrid:
    """Posterior mean density with the mode integrated out by the trapezoid rule."""
    t_grid = np.asarray(t_grid, dtype=float)
    if isinstance(prior, PointMassPrior):
        return exact_density_given_theta(model, base, center(observations, prior.value), t_grid, cap)
    nodes = theta_nodes(theta_grid, observations, t_grid, base, refine)
    log_mass, dens = _theta_sweep(model, base, observations, nodes, t_grid, cap)
    log_mass = log_mass + prior.log_density(nodes)
    if not np.any(np.isfinite(log_mass)):
        raise ValueError("theta grid has no node with positive posterior mass")
    w = _trapezoid_weights(nodes) * np.exp(log_mass - np.max(log_mass))
    return DensityGrid(t_grid, (w @ dens) / np.sum(w))

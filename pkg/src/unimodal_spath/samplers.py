"""Sequential importance sampling of S-paths and of the mode.

``sip_draw`` builds one path by fixing its interior coordinates in a
uniformly random order; each coordinate is drawn with probability
proportional to the target weight of the whole path obtained by keeping
undetermined coordinates flat.  ``naive_sis_draw`` is the left-to-right
scheme on growing truncated paths.  ``sis_full_draw`` samples the mode
from a proposal and then both paths, in random order, and returns the
importance weight of the triple.

Two backends compute the same draws from the same random inputs: a
pure-Python reference that works with any :class:`SpeciesModel` and
:class:`BaseMeasure`, and compiled kernels for product-form EPPFs with the
Pareto-mixture base measure.

Random streams: replicate ``i`` of a run with master seed ``s`` uses
``numpy.random.default_rng([s, i])`` so results do not depend on how
replicates are scheduled.
"""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from . import _kernels
from .base_measure import BaseMeasure, ParetoMixture
from .paths import SPath, log_comb
from .posterior import DensityGrid, KernelMixture, center_sorted, log_phi_path
from .species import SpeciesModel

TRIALS = ("exact", "three_case")


@dataclass(frozen=True)
class PathTarget:
    """Unnormalised path law ``phi(S) = |C_S| chi(M(S)) prod m^(dS_j)(Q_j)``.

    ``q`` holds ``|Q_1|..|Q_n|``; ``context`` the increments of an already
    drawn path, making the EPPF factor the conditional ratio.
    """

    model: SpeciesModel
    base: BaseMeasure
    q: np.ndarray
    context: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return len(self.q)

    def log_phi(self, path: SPath) -> float:
        return log_phi_path(self.model, self.base, self.q, path, self.context)

    def truncated(self, length: int) -> "PathTarget":
        return PathTarget(self.model, self.base, self.q[:length], self.context)

    @property
    def fast(self) -> bool:
        return self.model.product_form and isinstance(self.base, ParetoMixture)


@dataclass
class SipDraw:
    path: SPath
    log_kappa: float
    log_w: float
    permutation: tuple[int, ...]


# -- reference implementation -------------------------------------------


def _flat_coords(S: list, n: int, overrides: dict) -> tuple[int, ...]:
    vals = dict(overrides)
    out = []
    cur = 0
    for j in range(n + 1):
        if j in vals:
            cur = vals[j]
        elif S[j] is not None:
            cur = S[j]
        out.append(cur)
    return tuple(out)


def _three_case_log_weights(target, i, p, q, Sp, Sq, K, kmax, lq) -> np.ndarray:
    """Alternative three-case closed form of the trial weights (``trial="three_case"``).

    Differs from the exact local weights in its combinatorial factors and in
    evaluating the new jump's tail moment at ``Q_p`` (``Q_1`` when ``p = 0``).
    It is still a proper trial, so weights stay valid, but it is not
    proportional to the target and its effective sample size is far lower.
    """
    model, base = target.model, target.base
    L = Sq - Sp
    qp = lq(max(p, 1))
    out = []
    for k in range(Sp, kmax + 1):
        if k == Sp:
            c = 0.0 if L == 1 else math.log((i - Sp) / (L - 1))
            v = c + model.log_cell_weight(L) + base.log_tail_moment(L, lq(q))
        elif k == Sq:
            c = 0.0 if L == 1 else math.log((i - Sp) / (L - 1))
            c += sum(math.log((i - j) / (q - j)) for j in range(Sp + 1, Sq))
            v = c + model.log_cell_weight(L) + base.log_tail_moment(L, qp)
        else:
            c = log_comb(L - 2, Sq - k - 1) + sum(math.log((j - k) / (i - Sp)) for j in range(i + 1, q))
            v = (
                c
                + model.log_cell_weight(k - Sp)
                + model.log_cell_weight(Sq - k)
                + base.log_tail_moment(k - Sp, qp)
                + base.log_tail_moment(Sq - k, lq(q))
                + math.log(model.b + (len(target.context) + K) * model.a)
            )
        out.append(v)
    return np.asarray(out)


def local_log_weights(target: PathTarget, S: list, i, p, q, Sp, Sq, K, naive=False, trial="exact", direct=False):
    """Unnormalised log trial weights for ``S_i = Sp..min(i, Sq)``.

    ``direct`` recomputes ``log phi`` of each candidate flattened path from
    scratch; otherwise the product-form local factors are used.
    """
    kmax = min(i, Sq)
    qv = target.q

    def lq(j):
        return qv[j - 1]

    if trial == "three_case":
        return _three_case_log_weights(target, i, p, q, Sp, Sq, K, kmax, lq)
    if direct or not target.model.product_form:
        out = []
        if naive:
            sub = target.truncated(i + 1)
            prefix = [S[j] for j in range(i)]
            for k in range(Sp, kmax + 1):
                out.append(sub.log_phi(SPath(tuple(prefix) + (k, i + 1))))
        else:
            for k in range(Sp, kmax + 1):
                out.append(target.log_phi(SPath(_flat_coords(S, target.n, {i: k}))))
        return np.asarray(out)
    model, base = target.model, target.base
    L = Sq - Sp
    out = []
    for k in range(Sp, kmax + 1):
        if k == Sp:
            v = log_comb(q - 1 - Sp, q - Sq) + model.log_cell_weight(L) + base.log_tail_moment(L, lq(q))
        elif k == Sq:
            v = log_comb(i - 1 - Sp, i - Sq) + model.log_cell_weight(L) + base.log_tail_moment(L, lq(i))
        else:
            m = len(target.context) + K
            v = (
                log_comb(i - 1 - Sp, i - k)
                + log_comb(q - 1 - k, q - Sq)
                + model.log_cell_weight(k - Sp)
                + model.log_cell_weight(Sq - k)
                + base.log_tail_moment(k - Sp, lq(i))
                + base.log_tail_moment(Sq - k, lq(q))
                + math.log(model.b + m * model.a)
            )
        out.append(v)
    return np.asarray(out)


def _draw_reference(target: PathTarget, order, u, naive=False, trial="exact", force=None, direct=False):
    n = target.n
    S: list = [None] * (n + 1)
    S[0], S[n] = 0, n
    if force is not None:
        force = tuple(force)
    determined = [0, n]
    K = 1 if n >= 1 else 0
    log_kappa = 0.0
    for r in range(n - 1):
        if naive:
            i, p, q = r + 1, r, r + 2
            Sq = r + 2
        else:
            i = int(order[r])
            pos = bisect.bisect_left(determined, i)
            p, q = determined[pos - 1], determined[pos]
            Sq = S[q]
        Sp = S[p]
        kmax = min(i, Sq)
        if kmax == Sp:
            if force is not None and force[i] != Sp:
                return None, -math.inf
            S[i] = Sp
        else:
            lw = local_log_weights(target, S, i, p, q, Sp, Sq, K, naive, trial, direct)
            lz = logsumexp(lw)
            if force is not None:
                c = force[i] - Sp
                if not 0 <= c < len(lw):
                    return None, -math.inf
            else:
                cdf = np.cumsum(np.exp(lw - lz))
                c = min(int(np.searchsorted(cdf, u[r] * cdf[-1], side="right")), len(lw) - 1)
            log_kappa += lw[c] - lz
            S[i] = Sp + c
            if Sp < S[i] < Sq:
                K += 1
        if not naive:
            bisect.insort(determined, i)
    return SPath(tuple(S)), float(log_kappa)


# -- compiled backend ----------------------------------------------------


@dataclass(frozen=True)
class _Tables:
    log_cell: np.ndarray
    log_new: np.ndarray
    log_fact: np.ndarray
    log_anu: np.ndarray
    c0: float
    alpha: float
    delta: float


@lru_cache(maxsize=32)
def _tables(model: SpeciesModel, base: ParetoMixture, size: int) -> _Tables:
    size = max(size, 2)
    return _Tables(
        log_cell=model.cell_log_weights(size + 1),
        log_new=model.new_cluster_log_weights(2 * size + 2),
        log_fact=gammaln(np.arange(size + 2, dtype=float) + 1.0),
        log_anu=np.log(base.alpha + np.arange(size + 3, dtype=float)),
        c0=base.log_scale,
        alpha=base.alpha,
        delta=base.delta,
    )


def _draw_fast(target: PathTarget, order, u, naive=False, force=None, tables=None):
    """Returns ``(S, log_kappa, log_phi, increments)``."""
    n = target.n
    tb = tables or _tables(target.model, target.base, n)
    logq = np.log(np.maximum(np.abs(target.q), tb.delta))
    S = np.zeros(n + 1, np.int64) if force is None else np.asarray(force, np.int64).copy()
    order = np.asarray(order, np.int64) if len(order) else np.zeros(0, np.int64)
    u = np.asarray(u, float) if len(u) else np.zeros(0)
    lk = _kernels.draw_path(
        n, order, u, naive, force is not None, logq, tb.c0, tb.alpha, tb.log_anu,
        tb.log_cell, tb.log_new, len(target.context), tb.log_fact, S,
    )
    incs = np.zeros(n + 1, np.int64)
    part, k = _kernels.path_log_weight(n, S, logq, tb.c0, tb.alpha, tb.log_anu, tb.log_fact, incs)
    incs = tuple(int(x) for x in incs[:k])
    model = target.model
    chi = model.log_chi_conditional(target.context, incs) if target.context else model.log_chi(incs)
    return S, float(lk), float(part + chi) if n else 0.0, incs


def _use_fast(target: PathTarget, trial: str, backend: str) -> bool:
    if trial not in TRIALS:
        raise ValueError(f"trial must be one of {TRIALS}")
    if backend == "python" or trial != "exact":
        return False
    if backend == "numba":
        if not target.fast:
            raise ValueError("compiled backend needs a product-form EPPF and the Pareto base measure")
        return True
    return target.fast


def _random_inputs(n: int, rng: np.random.Generator, naive: bool):
    if n <= 1:
        return np.zeros(0, np.int64), np.zeros(0)
    order = np.arange(1, n, dtype=np.int64) if naive else rng.permutation(np.arange(1, n, dtype=np.int64))
    return order, rng.random(n - 1)


def sip_draw(target: PathTarget, rng: np.random.Generator, *, naive=False, trial="exact", backend="auto") -> SipDraw:
    """One weighted path from the SIP sampler (or the naive scheme).

    ``trial`` selects the step weights: ``"exact"`` (proportional to the
    target weight of the flattened path) or ``"three_case"``.
    """
    if target.n < 1:
        raise ValueError("need n >= 1")
    order, u = _random_inputs(target.n, rng, naive)
    if _use_fast(target, trial, backend):
        S, lk, lphi, _ = _draw_fast(target, order, u, naive)
        path = SPath(tuple(int(x) for x in S))
    else:
        path, lk = _draw_reference(target, order, u, naive, trial)
        lphi = target.log_phi(path)
    return SipDraw(path, lk, lphi - lk, tuple(int(x) for x in order))


def naive_sis_draw(target: PathTarget, rng: np.random.Generator, **kw) -> SipDraw:
    return sip_draw(target, rng, naive=True, **kw)


def log_kappa_of(target: PathTarget, path: SPath, order: Sequence[int] = (), *, naive=False, trial="exact", backend="python") -> float:
    """Trial log probability of ``path`` under insertion ``order``."""
    if path.n != target.n:
        raise ValueError("path length does not match target")
    if _use_fast(target, trial, backend):
        _, lk, _, _ = _draw_fast(target, order, (), naive, force=path.coords)
        return lk
    _, lk = _draw_reference(target, order, None, naive, trial, force=path.coords)
    return lk


def log_ess(log_w) -> float:
    lw = np.asarray(log_w, dtype=float)
    lw = lw[np.isfinite(lw)]
    if lw.size == 0:
        return -math.inf
    return float(2.0 * logsumexp(lw) - logsumexp(2.0 * lw))


def ess(log_w) -> float:
    """Effective sample size ``(sum w)^2 / sum w^2``."""
    return math.exp(log_ess(log_w))


def self_normalized(values: np.ndarray, log_w) -> tuple[np.ndarray, np.ndarray]:
    """Weighted mean and delta-method standard error along axis 0."""
    lw = np.asarray(log_w, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise ValueError("all importance weights are zero")
    w = np.exp(lw - logsumexp(lw))
    values = np.asarray(values, dtype=float)
    wv = w.reshape((-1,) + (1,) * (values.ndim - 1))
    est = np.sum(wv * values, axis=0)
    se = np.sqrt(np.sum(wv**2 * (values - est) ** 2, axis=0))
    return est, se


def path_expectation(
    target: PathTarget,
    h: Callable[[SPath], float],
    M: int,
    seed: int = 0,
    *,
    naive=False,
    backend="auto",
) -> tuple[float, float, float]:
    """Self-normalised estimate of ``E h(S)``; returns ``(estimate, ess, stderr)``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    vals = np.empty(M)
    lw = np.empty(M)
    for i in range(M):
        d = sip_draw(target, np.random.default_rng([seed, i]), naive=naive, backend=backend)
        vals[i] = h(d.path)
        lw[i] = d.log_w
    est, se = self_normalized(vals, lw)
    return float(est), ess(lw), float(se)


# -- full scheme over (S-, S+, theta) -----------------------------------


def _jumps(S: np.ndarray) -> np.ndarray:
    d = np.diff(S)
    loc = np.flatnonzero(d > 0)
    return np.stack([loc + 1, d[loc]], axis=1) if loc.size else np.zeros((0, 2), np.int64)


def _path_from_jumps(n: int, jumps: np.ndarray) -> SPath:
    inc = np.zeros(n + 1, np.int64)
    if len(jumps):
        inc[jumps[:, 0]] = jumps[:, 1]
    return SPath(tuple(int(x) for x in np.cumsum(inc)))


@dataclass
class WeightedDraw:
    theta: float
    log_w: float
    n_plus: int
    n_minus: int
    plus_jumps: np.ndarray = field(repr=False)
    minus_jumps: np.ndarray = field(repr=False)
    plus_first: bool = True

    @property
    def s_plus(self) -> SPath:
        return _path_from_jumps(self.n_plus, self.plus_jumps)

    @property
    def s_minus(self) -> SPath:
        return _path_from_jumps(self.n_minus, self.minus_jumps)


def _draw_side(target: PathTarget, rng, backend):
    n = target.n
    order, u = _random_inputs(n, rng, False)
    if n == 0:
        return np.zeros((0, 2), np.int64), 0.0, 0.0, ()
    if _use_fast(target, "exact", backend):
        S, lk, lphi, incs = _draw_fast(target, order, u)
        return _jumps(S), lk, lphi, incs
    path, lk = _draw_reference(target, order, u)
    S = np.asarray(path.coords)
    return _jumps(S), lk, target.log_phi(path), path.increments


def sis_full_draw(
    model: SpeciesModel,
    base: BaseMeasure,
    observations,
    prior,
    rho,
    rng: np.random.Generator,
    *,
    mode_known: float | None = None,
    backend: str = "auto",
    sorted_obs: np.ndarray | None = None,
) -> WeightedDraw:
    """One weighted draw of ``(S-, S+, theta)``.

    With ``mode_known`` the mode is fixed, and the weight covers the two
    paths only.
    """
    obs = sorted_obs if sorted_obs is not None else np.sort(np.asarray(observations, dtype=float))
    if mode_known is None:
        theta = rho.sample(rng)
        log_prior = prior.log_density(theta)
        log_rho = rho.log_density(theta)
    else:
        theta, log_prior, log_rho = float(mode_known), 0.0, 0.0
    data = center_sorted(obs, theta)
    plus_first = bool(rng.random() < 0.5)
    empty = np.zeros((0, 2), np.int64)
    if data.likelihood_zero or not np.isfinite(log_prior):
        return WeightedDraw(theta, -math.inf, data.n, data.N - data.n, empty, empty, plus_first)
    y, zabs = data.y, -data.z
    if plus_first:
        jp, kp, fp, incs = _draw_side(PathTarget(model, base, y), rng, backend)
        jm, km, fm, _ = _draw_side(PathTarget(model, base, zabs, incs), rng, backend)
    else:
        jm, km, fm, incs = _draw_side(PathTarget(model, base, zabs), rng, backend)
        jp, kp, fp, _ = _draw_side(PathTarget(model, base, y, incs), rng, backend)
    log_w = fp + fm + log_prior - kp - km - log_rho
    return WeightedDraw(theta, float(log_w), data.n, data.N - data.n, jp, jm, plus_first)


def run_sis(
    model,
    base,
    observations,
    M: int,
    seed: int,
    *,
    prior=None,
    rho=None,
    mode_known: float | None = None,
    backend: str = "auto",
    threads: int = 1,
) -> list[WeightedDraw]:
    """``M`` independent draws; replicate ``i`` uses ``default_rng([seed, i])``."""
    if M < 1:
        raise ValueError("draws must be >= 1")
    if mode_known is None and (prior is None or rho is None):
        raise ValueError("unknown-mode sampling needs a prior and a proposal rho")
    obs = np.sort(np.asarray(observations, dtype=float))

    def one(i: int) -> WeightedDraw:
        rng = np.random.default_rng([seed, i])
        return sis_full_draw(model, base, obs, prior, rho, rng, mode_known=mode_known, backend=backend, sorted_obs=obs)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, range(M)))
    return [one(i) for i in range(M)]


@dataclass
class SISResult:
    theta_hat: float
    theta_stderr: float
    density: DensityGrid | None
    ess: float
    draws: int
    log_w: np.ndarray = field(repr=False)


def draw_kernel(model, base, obs_sorted: np.ndarray, d: WeightedDraw, weight: float = 1.0, into: KernelMixture | None = None) -> KernelMixture:
    """``a_f`` of one draw as a kernel mixture (scaled by ``weight``)."""
    from .posterior import PathPair

    km = into if into is not None else KernelMixture(base)
    data = center_sorted(obs_sorted, d.theta)
    km.add_pair(model, data, PathPair(d.s_plus, d.s_minus), weight)
    return km


def sis_estimates(
    draws: Sequence[WeightedDraw],
    model,
    base,
    observations,
    t_grid=None,
    *,
    relative_cutoff: float = 1e-15,
) -> SISResult:
    """Self-normalised mode and density estimates from weighted draws.

    Draws whose normalised weight is below ``relative_cutoff`` times the
    largest are left out of the density sum (their total contribution is
    below ``M * relative_cutoff`` relative).
    """
    lw = np.array([d.log_w for d in draws])
    if not np.any(np.isfinite(lw)):
        raise ValueError("zero total importance weight")
    thetas = np.array([d.theta for d in draws])
    theta_hat, theta_se = self_normalized(thetas, lw)
    density = None
    if t_grid is not None:
        t_grid = np.asarray(t_grid, dtype=float)
        obs = np.sort(np.asarray(observations, dtype=float))
        w = np.exp(lw - logsumexp(lw))
        keep = np.flatnonzero(w > relative_cutoff * w.max())
        wk = w[keep] / w[keep].sum()
        vals = np.empty((keep.size, t_grid.size))
        for r, i in enumerate(keep):
            vals[r] = draw_kernel(model, base, obs, draws[i])(t_grid)
        est = wk @ vals
        se = np.sqrt(np.sum(wk[:, None] ** 2 * (vals - est) ** 2, axis=0))
        density = DensityGrid(t_grid, est, se)
    return SISResult(float(theta_hat), float(theta_se), density, ess(lw), len(draws), lw)

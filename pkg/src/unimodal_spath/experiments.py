"""Test densities and scripted simulation studies.

Three unimodal test densities are provided with exact inverse-CDF samplers:

* ``lambda1``: piecewise constant on ``(-7, 0]`` with an exponential right
  tail; modal interval ``[-1, 0]``.
* ``lambda2``: piecewise constant with modal interval ``[0, 0.1]``.  The
  last piece (height 0.1) runs to 3.6 so that the density integrates to 1.
* ``lambda3``: standard Cauchy shapes squeezed by 1.5 on the left and
  stretched by 1.5 on the right, renormalised by 12/13; mode 0.

``run_experiment`` runs the mode-known study (conditional density estimate
for fixed modes), the unknown-mode study (mode and density estimates) and
the replicated mode study, writing CSV and JSON under an output directory.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .base_measure import ParetoMixture
from .priors import default_prior, parse_rho
from .samplers import run_sis, sis_estimates
from .species import PoissonDirichlet

L1_GRID = np.round(np.arange(-10.0, 10.0 + 1e-9, 0.01), 10)


@dataclass(frozen=True)
class TestDensity:
    __test__ = False  # not a pytest class

    name: str
    pdf: Callable = field(repr=False)
    cdf: Callable = field(repr=False)
    ppf: Callable = field(repr=False)
    modal_set: tuple[float, float]

    def __call__(self, t):
        return self.pdf(t)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 1:
            raise ValueError("sample size must be >= 1")
        return self.ppf(rng.random(n))


def _piecewise(pieces, tail_start=None, tail_mass=0.0):
    """Piecewise-constant density on ``(lo, hi]`` pieces plus an optional
    ``tail_mass * exp(-(t - tail_start))`` right tail."""
    lo = np.array([p[0] for p in pieces])
    hi = np.array([p[1] for p in pieces])
    h = np.array([p[2] for p in pieces])
    cum = np.concatenate([[0.0], np.cumsum(h * (hi - lo))])

    def pdf(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for a, b, v in pieces:
            out = np.where((t > a) & (t <= b), v, out)
        if tail_start is not None:
            out = np.where(t > tail_start, tail_mass * np.exp(-(t - tail_start)), out)
        return out if out.ndim else float(out)

    def cdf(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for k, (a, b, v) in enumerate(pieces):
            out = np.where(t > a, cum[k] + v * (np.minimum(t, b) - a), out)
        if tail_start is not None:
            out = np.where(t > tail_start, cum[-1] + tail_mass * (1.0 - np.exp(-(t - tail_start))), out)
        return out if out.ndim else float(out)

    def ppf(u):
        u = np.asarray(u, dtype=float)
        k = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(pieces) - 1)
        out = lo[k] + (u - cum[k]) / h[k]
        if tail_start is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                tail = tail_start - np.log1p(-(u - cum[-1]) / tail_mass)
            out = np.where(u >= cum[-1], tail, out)
        return out

    return pdf, cdf, ppf


def _lambda1() -> TestDensity:
    pdf, cdf, ppf = _piecewise([(-7.0, -2.0, 0.02), (-2.0, -1.0, 0.1), (-1.0, 0.0, 0.4)], 0.0, 0.4)
    return TestDensity("lambda1", pdf, cdf, ppf, (-1.0, 0.0))


def _lambda2() -> TestDensity:
    pdf, cdf, ppf = _piecewise([(-7.0, -2.0, 0.02), (-2.0, 0.0, 0.25), (0.0, 0.1, 0.5), (0.1, 3.6, 0.1)])
    return TestDensity("lambda2", pdf, cdf, ppf, (0.0, 0.1))


def _lambda3() -> TestDensity:
    c = 12.0 / 13.0
    left = 4.0 / 13.0

    def pdf(t):
        t = np.asarray(t, dtype=float)
        s = np.where(t < 0, 1.5 * t, t / 1.5)
        out = c / (math.pi * (1.0 + s * s))
        return out if out.ndim else float(out)

    def cdf(t):
        t = np.asarray(t, dtype=float)
        neg = (c / 1.5) * (0.5 + np.arctan(1.5 * t) / math.pi)
        pos = left + c * 1.5 * np.arctan(t / 1.5) / math.pi
        out = np.where(t < 0, neg, pos)
        return out if out.ndim else float(out)

    def ppf(u):
        u = np.asarray(u, dtype=float)
        neg = np.tan(math.pi * (u * 1.5 / c - 0.5)) / 1.5
        pos = 1.5 * np.tan(math.pi * (u - left) / (1.5 * c))
        return np.where(u < left, neg, pos)

    return TestDensity("lambda3", pdf, cdf, ppf, (0.0, 0.0))


DENSITIES = {"lambda1": _lambda1(), "lambda2": _lambda2(), "lambda3": _lambda3()}


def get_density(name: str) -> TestDensity:
    try:
        return DENSITIES[name]
    except KeyError:
        raise ValueError(f"unknown test density {name!r}; choose from {sorted(DENSITIES)}") from None


def l1_distance(estimate_t, estimate, density: TestDensity, grid=L1_GRID) -> float:
    """Trapezoid L1 distance on a fixed grid; the estimate is interpolated."""
    est = np.interp(grid, estimate_t, estimate, left=0.0, right=0.0)
    return float(np.trapezoid(np.abs(est - density(grid)), grid))


# -- experiment driver ---------------------------------------------------


@dataclass
class ExperimentConfig:
    density: str = "lambda1"
    sizes: tuple[int, ...] | None = None
    draws: int = 1000
    pd_a: float = 0.0
    pd_b: float = 1.0
    pareto_alpha: float = 1e-6
    pareto_delta: float = 1e-6
    mode_known: tuple[float, ...] = ()
    rhos: tuple[str, ...] = ("normal:0,1", "normal:0,0.25")
    prior_width: float | None = None
    replications: int = 0
    seed: int = 0
    grid: tuple[float, float, float] = (-10.0, 10.0, 0.01)
    threads: int = 1

    def resolved_sizes(self) -> tuple[int, ...]:
        """Sizes as given; by default 500/1000/3000 with a known mode, else 500/1000/2000."""
        if self.sizes is not None:
            return tuple(int(n) for n in self.sizes)
        return (500, 1000, 3000) if self.mode_known else (500, 1000, 2000)

    def validate(self) -> None:
        get_density(self.density)
        sizes = self.resolved_sizes()
        if not sizes or any(n < 2 for n in sizes):
            raise ValueError("sizes must be a non-empty list of integers >= 2")
        if self.draws < 1:
            raise ValueError("draws must be >= 1")
        if self.replications < 0:
            raise ValueError("replications must be >= 0")
        lo, hi, step = self.grid
        if not (hi > lo and step > 0):
            raise ValueError("grid needs lo < hi and step > 0")
        PoissonDirichlet(self.pd_a, self.pd_b)
        ParetoMixture(self.pareto_alpha, self.pareto_delta)
        for r in self.rhos:
            parse_rho(r)

    def t_grid(self) -> np.ndarray:
        lo, hi, step = self.grid
        return lo + step * np.arange(int(round((hi - lo) / step)) + 1)


def cell_seed(seed: int, *index: int) -> int:
    """Deterministic 63-bit seed for one experiment cell."""
    return int(np.random.SeedSequence([seed, *index]).generate_state(1, np.uint64)[0] >> np.uint64(1))


def nested_sample(density: TestDensity, sizes, seed: int) -> np.ndarray:
    """One stream of ``max(sizes)`` draws; each size uses a prefix of it."""
    return density.sample(max(sizes), np.random.default_rng([seed, 0]))


@dataclass
class ExperimentRow:
    density: str
    N: int
    setting: str
    theta_hat: float
    ess: float
    l1: float | None
    runtime_ms: float
    csv: str | None = None


def _estimate(cfg, model, base, data, rho_spec, theta0, seed, t_grid, need_density=True):
    t0 = time.perf_counter()
    if theta0 is None:
        prior = default_prior(data, cfg.prior_width)
        rho = parse_rho(rho_spec)
        draws = run_sis(model, base, data, cfg.draws, seed, prior=prior, rho=rho, threads=cfg.threads)
    else:
        draws = run_sis(model, base, data, cfg.draws, seed, mode_known=theta0, threads=cfg.threads)
    res = sis_estimates(draws, model, base, data, t_grid if need_density else None)
    return res, 1000.0 * (time.perf_counter() - t0)


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Run every cell of the configured study.

    Mode-known cells are ``(N, theta0)``; unknown-mode cells are
    ``(N, rho)``.  With ``replications > 0`` the unknown-mode cells are
    repeated on fresh samples and only the mode estimates are kept.
    """
    cfg.validate()
    dens = get_density(cfg.density)
    model = PoissonDirichlet(cfg.pd_a, cfg.pd_b)
    base = ParetoMixture(cfg.pareto_alpha, cfg.pareto_delta)
    t_grid = cfg.t_grid()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    rows: list[ExperimentRow] = []
    replicated: dict[str, list[float]] = {}
    sizes = sorted(cfg.resolved_sizes())
    if cfg.replications:
        for ri, rho_spec in enumerate(cfg.rhos):
            thetas = []
            for rep in range(cfg.replications):
                data = dens.sample(sizes[0], np.random.default_rng([cfg.seed, 2, rep]))
                res, _ = _estimate(cfg, model, base, data, rho_spec, None, cell_seed(cfg.seed, 3, ri, rep), None, False)
                thetas.append(res.theta_hat)
            replicated[rho_spec] = thetas
    else:
        data_all = nested_sample(dens, sizes, cfg.seed)
        settings = [("theta0=%g" % th, None, th) for th in cfg.mode_known] or [("rho=" + r, r, None) for r in cfg.rhos]
        cell = 0
        for N in sizes:
            data = data_all[:N]
            for label, rho_spec, theta0 in settings:
                res, ms = _estimate(cfg, model, base, data, rho_spec, theta0, cell_seed(cfg.seed, 1, cell), t_grid)
                cell += 1
                l1 = l1_distance(res.density.t, res.density.estimate, dens)
                csv = None
                if out is not None:
                    csv = f"{cfg.density}_N{N}_{label.replace('=', '_').replace(':', '_').replace(',', '_')}.csv"
                    res.density.to_csv(out / csv)
                rows.append(ExperimentRow(cfg.density, N, label, res.theta_hat, res.ess, l1, ms, csv))
    report = {
        "config": asdict(cfg),
        "rows": [asdict(r) for r in rows],
        "replicated_theta": replicated,
    }
    if out is not None:
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
    return report


def mode_table(reports: dict[str, dict]) -> str:
    """Mode estimates laid out as rho by N rows and one column per density."""
    names = sorted(reports)
    entries: dict = {}
    for name in names:
        for row in reports[name]["rows"]:
            entries[(row["setting"], row["N"], name)] = row["theta_hat"]
    keys = sorted({(s, n) for s, n, _ in entries}, key=lambda k: (k[0], k[1]))
    lines = ["rho,N," + ",".join(names)]
    for s, n in keys:
        vals = [entries.get((s, n, name)) for name in names]
        lines.append(f'"{s.removeprefix("rho=")}",{n},' + ",".join("" if v is None else f"{v:.6f}" for v in vals))
    return "\n".join(lines) + "\n"

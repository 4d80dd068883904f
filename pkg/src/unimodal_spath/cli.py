"""Command-line interface.

Subcommands::

    simulate          draw a sample from a test density
    estimate-density  SIS density estimate (mode known or unknown)
    estimate-mode     SIS mode estimate
    exact             exact path-based density for a small sample
    oracle-compare    path engine vs partition oracle on a small sample
    count             path and partition counts (``--table1 N``)
    sip-diag          SIP vs naive ESS on one data side
    experiment        scripted study from a config file

Data files hold one observation per line; blank lines and ``#`` comments
are ignored.  Errors are reported on stderr as a JSON object and give a
nonzero exit status.  Results go to ``--out`` or, failing that, to
``$UNIMODAL_RESULTS_DIR`` (default ``results``).

A config file is ``key = value`` lines (an optional ``[run]`` header is
accepted) using the long option names with dashes or underscores; values
given on the command line take precedence.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .base_measure import ParetoMixture
from .oracle import exact_density as oracle_density
from .oracle import conditional_uniformity_check
from .paths import EnumerationCapError, PathError, count_partitions, count_paths, table1
from .posterior import center, exact_density_given_theta, exact_density_unknown_theta, exact_theta_posterior
from .priors import UniformPrior, default_prior, default_rho, parse_rho
from .samplers import PathTarget, run_sis, sip_draw, sis_estimates
from .samplers import ess as ess_of
from .species import PoissonDirichlet

RESULTS_ENV = "UNIMODAL_RESULTS_DIR"


class CliError(Exception):
    def __init__(self, kind: str, message: str, **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra


def read_observations(path: str) -> np.ndarray:
    vals = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip().rstrip(",")
            if not line:
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise CliError("malformed-input", f"{path}:{lineno}: not a number: {line!r}") from None
    if not vals:
        raise CliError("malformed-input", f"{path}: no observations")
    arr = np.asarray(vals)
    if not np.all(np.isfinite(arr)):
        raise CliError("malformed-input", f"{path}: non-finite observation")
    return arr


def write_observations(path: Path, data: np.ndarray) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for x in data:
            fh.write(f"{float(x)!r}\n")


def parse_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise CliError("bad-grid", f"grid must be lo:hi:step, got {spec!r}") from None
    if not (hi > lo and step > 0):
        raise CliError("bad-grid", f"grid needs lo < hi and step > 0, got {spec!r}")
    return lo + step * np.arange(int(round((hi - lo) / step)) + 1)


def load_config(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string(text)
    out = {}
    for section in cp.sections():
        for k, v in cp.items(section):
            out[k.replace("-", "_")] = v
    return out


def _add_model(p):
    p.add_argument("--pd-a", type=float, default=None, help="PD discount a (default 0)")
    p.add_argument("--pd-b", type=float, default=None, help="PD strength b (default 1)")
    p.add_argument("--pareto-alpha", type=float, default=None, help="default 1e-6")
    p.add_argument("--pareto-delta", type=float, default=None, help="default 1e-6")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--out", help="output directory")


def _add_sampler(p):
    p.add_argument("--data", required=False)
    p.add_argument("--draws", type=int, default=None, help="Monte Carlo size M (default 1000)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rho", default=None, help="normal:MU,SIGMA or uniform:LO,HI (default Normal(median, 0.25))")
    p.add_argument("--prior-width", type=float, default=None, help="prior half-margin beyond the data range (default sample SD)")
    p.add_argument("--mode-known", type=float, default=None)
    p.add_argument("--threads", type=int, default=None)


DEFAULTS = {
    "pd_a": 0.0,
    "pd_b": 1.0,
    "pareto_alpha": 1e-6,
    "pareto_delta": 1e-6,
    "draws": 1000,
    "seed": 0,
    "threads": 1,
    "grid": "-10:10:0.01",
    "density": "lambda1",
    "size": 500,
    "theta_step": 0.01,
    "seeds": 10,
    "rtol": 1e-10,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unimodal-spath", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample from a test density")
    p.add_argument("--density", default=None, choices=sorted(ex.DENSITIES))
    p.add_argument("-n", "--size", type=int, default=None, help="default 500")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", help="file to write (default <out>/<density>_<n>.csv)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config")

    for name in ("estimate-density", "estimate-mode"):
        p = sub.add_parser(name)
        _add_model(p)
        _add_sampler(p)
        p.add_argument("--grid", default=None, help="lo:hi:step")

    p = sub.add_parser("exact", help="exact density by path enumeration")
    _add_model(p)
    p.add_argument("--data")
    p.add_argument("--theta", type=float, default=None, help="known mode; otherwise integrate over a uniform prior")
    p.add_argument("--prior", default=None, help="LO,HI of the uniform mode prior")
    p.add_argument("--theta-step", type=float, default=None, help="default 0.01")
    p.add_argument("--grid", default=None)
    p.add_argument("--cap", type=int, default=None, help="enumeration cap on N (default 14)")

    p = sub.add_parser("oracle-compare", help="path engine vs partition oracle")
    _add_model(p)
    p.add_argument("--data")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--cap", type=int, default=None, help="partition enumeration cap on N (default 12)")
    p.add_argument("--rtol", type=float, default=None, help="relative tolerance; exit 1 when exceeded (default 1e-10)")

    p = sub.add_parser("count", help="path and partition counts")
    p.add_argument("--table1", type=int, metavar="N", help="print the N-observation table")
    p.add_argument("-n", type=int, help="single n")
    p.add_argument("--config")
    p.add_argument("--out")

    p = sub.add_parser("sip-diag", help="SIP vs naive ESS on the positive side")
    _add_model(p)
    p.add_argument("--data")
    p.add_argument("--theta", type=float, default=None, help="mode (default sample median)")
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--seeds", type=int, default=None, help="default 10")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("experiment", help="scripted study")
    p.add_argument("--config", help="key = value file; see README")
    p.add_argument("--density", default=None, help="test density or comma list (lambda1,lambda2,lambda3)")
    p.add_argument("--sizes", default=None, help="comma list of N (default 500,1000,3000 mode-known, else 500,1000,2000)")
    p.add_argument("--mode-known", default=None, help="comma list of known modes")
    p.add_argument("--rhos", default=None, help="semicolon list of rho specs")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--pd-a", type=float, default=None)
    p.add_argument("--pd-b", type=float, default=None)
    p.add_argument("--pareto-alpha", type=float, default=None)
    p.add_argument("--pareto-delta", type=float, default=None)
    p.add_argument("--prior-width", type=float, default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out")
    return ap


def effective(args) -> dict:
    """Merge defaults < config file < command-line flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    for k, v in vars(args).items():
        if v is not None and k != "config":
            cfg[k] = v
    return cfg


def _f(cfg, key):
    v = cfg.get(key)
    return None if v is None or v == "" else float(v)


def _model(cfg):
    try:
        return PoissonDirichlet(float(cfg["pd_a"]), float(cfg["pd_b"])), ParetoMixture(
            float(cfg["pareto_alpha"]), float(cfg["pareto_delta"])
        )
    except ValueError as e:
        raise CliError("invalid-parameter", str(e)) from None


def _out_dir(cfg) -> Path:
    d = Path(cfg.get("out") or os.environ.get(RESULTS_ENV, "results"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _data(cfg) -> np.ndarray:
    if not cfg.get("data"):
        raise CliError("missing-input", "--data is required")
    return read_observations(cfg["data"])


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


def cmd_simulate(cfg):
    dens = ex.get_density(cfg.get("density", "lambda1"))
    n = int(cfg.get("size", 500))
    data = dens.sample(n, np.random.default_rng([int(cfg["seed"]), 0]))
    path = Path(cfg["output"]) if cfg.get("output") else _out_dir(cfg) / f"{dens.name}_{n}.csv"
    write_observations(path, data)
    _emit({"density": dens.name, "n": n, "seed": int(cfg["seed"]), "path": str(path)})


def _sis(cfg, want_density: bool):
    model, base = _model(cfg)
    data = _data(cfg)
    M, seed, threads = int(cfg["draws"]), int(cfg["seed"]), int(cfg["threads"])
    t0 = time.perf_counter()
    mode_known = _f(cfg, "mode_known")
    if mode_known is None:
        try:
            prior = default_prior(data, _f(cfg, "prior_width"))
            rho = parse_rho(cfg["rho"]) if cfg.get("rho") else default_rho(data)
        except ValueError as e:
            raise CliError("invalid-parameter", str(e)) from None
        draws = run_sis(model, base, data, M, seed, prior=prior, rho=rho, threads=threads)
    else:
        draws = run_sis(model, base, data, M, seed, mode_known=mode_known, threads=threads)
    grid = parse_grid(cfg["grid"]) if want_density else None
    try:
        res = sis_estimates(draws, model, base, data, grid)
    except ValueError as e:
        raise CliError("zero-weight", str(e)) from None
    summary = {
        "theta_hat": res.theta_hat,
        "theta_stderr": res.theta_stderr,
        "ess": res.ess,
        "draws": M,
        "M": M,
        "seed": seed,
        "runtime_ms": 1000.0 * (time.perf_counter() - t0),
        "config": {k: v for k, v in sorted(cfg.items())},
    }
    return res, summary


def cmd_estimate_density(cfg):
    res, summary = _sis(cfg, True)
    out = _out_dir(cfg)
    res.density.to_csv(out / "density.csv")
    summary["density_csv"] = str(out / "density.csv")
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
    _emit(summary)


def cmd_estimate_mode(cfg):
    _, summary = _sis(cfg, False)
    _emit(summary)


def _small(cfg):
    model, base = _model(cfg)
    data = _data(cfg)
    grid = parse_grid(cfg["grid"] if "grid" in cfg and cfg["grid"] != DEFAULTS["grid"] else "-5:5:0.1")
    return model, base, data, grid


def cmd_exact(cfg):
    model, base, data, grid = _small(cfg)
    theta = _f(cfg, "theta")
    cap = int(cfg.get("cap") or 14)
    t0 = time.perf_counter()
    try:
        if theta is not None:
            dens = exact_density_given_theta(model, base, center(data, theta), grid, cap)
            extra = {"theta": theta}
        else:
            if cfg.get("prior"):
                lo, hi = (float(x) for x in str(cfg["prior"]).split(","))
                prior = UniformPrior(lo, hi)
            else:
                prior = default_prior(data)
            step = float(cfg.get("theta_step", 0.01))
            th_grid = prior.lo + step * np.arange(int(round((prior.hi - prior.lo) / step)) + 1)
            dens = exact_density_unknown_theta(model, base, data, prior, th_grid, grid, cap)
            post = exact_theta_posterior(model, base, data, prior, th_grid, cap)
            extra = {"theta_mean": post.mean, "prior": [prior.lo, prior.hi]}
    except (EnumerationCapError, ValueError) as e:
        raise CliError("invalid-input", str(e)) from None
    out = _out_dir(cfg)
    dens.to_csv(out / "exact_density.csv")
    _emit({**extra, "N": int(data.size), "csv": str(out / "exact_density.csv"), "runtime_ms": 1000.0 * (time.perf_counter() - t0)})


def cmd_oracle_compare(cfg):
    model, base, data, grid = _small(cfg)
    theta = _f(cfg, "theta")
    if theta is None:
        theta = 0.0
    t0 = time.perf_counter()
    try:
        d = center(data, theta)
        path_d = exact_density_given_theta(model, base, d, grid)
        t1 = time.perf_counter()
        cap = int(cfg.get("cap") or 12)
        part_d = oracle_density(model, base, d, grid, cap)
        t2 = time.perf_counter()
        unif = conditional_uniformity_check(model, base, d, cap)
    except (EnumerationCapError, ValueError) as e:
        raise CliError("invalid-input", str(e)) from None
    rel = np.abs(path_d.estimate - part_d.estimate) / np.maximum(np.abs(part_d.estimate), 1e-300)
    rtol = float(cfg["rtol"])
    ok = bool(np.max(rel) <= rtol)
    _emit(
        {
            "theta": theta,
            "N": int(data.size),
            "max_abs_deviation": float(np.max(np.abs(path_d.estimate - part_d.estimate))),
            "max_rel_deviation": float(np.max(rel)),
            "conditional_uniformity_deviation": unif,
            "runtime_ms_paths": 1000.0 * (t1 - t0),
            "runtime_ms_partitions": 1000.0 * (t2 - t1),
            "rtol": rtol,
            "pass": ok,
        }
    )
    return 0 if ok else 1


def cmd_count(cfg):
    if cfg.get("table1") is not None:
        for row in table1(int(cfg["table1"])):
            print(row.format())
    elif cfg.get("n") is not None:
        n = int(cfg["n"])
        _emit({"n": n, "paths": count_paths(n), "partitions": count_partitions(n)})
    else:
        raise CliError("missing-input", "give --table1 N or -n N")


def cmd_sip_diag(cfg):
    model, base = _model(cfg)
    data = _data(cfg)
    theta = _f(cfg, "theta")
    theta = float(np.median(data)) if theta is None else theta
    d = center(data, theta)
    if d.n < 1:
        raise CliError("invalid-input", "no observations above theta")
    target = PathTarget(model, base, d.y)
    M = int(cfg["draws"])
    seed = int(cfg["seed"])
    out = {"n": d.n, "draws": M, "seeds": int(cfg["seeds"]), "sip_ess": [], "naive_ess": []}
    for s in range(int(cfg["seeds"])):
        for key, naive in (("sip_ess", False), ("naive_ess", True)):
            lw = [sip_draw(target, np.random.default_rng([seed, s, i]), naive=naive).log_w for i in range(M)]
            out[key].append(ess_of(lw))
    out["sip_median"] = float(np.median(out["sip_ess"]))
    out["naive_median"] = float(np.median(out["naive_ess"]))
    _emit(out)


def _list(v, conv=float, sep=","):
    if v is None or v == "":
        return ()
    if isinstance(v, (list, tuple)):
        return tuple(conv(x) for x in v)
    return tuple(conv(x) for x in str(v).split(sep) if x.strip())


def cmd_experiment(cfg):
    grid = str(cfg["grid"]).split(":")
    names = _list(cfg.get("density", "lambda1"), str.strip)
    out = _out_dir(cfg)
    reports = {}
    try:
        for name in names:
            ecfg = ex.ExperimentConfig(
                density=name,
                sizes=_list(cfg.get("sizes"), int) or None,
                draws=int(cfg["draws"]),
                pd_a=float(cfg["pd_a"]),
                pd_b=float(cfg["pd_b"]),
                pareto_alpha=float(cfg["pareto_alpha"]),
                pareto_delta=float(cfg["pareto_delta"]),
                mode_known=_list(cfg.get("mode_known")),
                rhos=_list(cfg.get("rhos", "normal:0,1;normal:0,0.25"), str.strip, ";"),
                prior_width=_f(cfg, "prior_width"),
                replications=int(cfg.get("replications", 0)),
                seed=int(cfg["seed"]),
                grid=tuple(float(x) for x in grid),
                threads=int(cfg["threads"]),
            )
            reports[name] = ex.run_experiment(ecfg, out / name if len(names) > 1 else out)
    except ValueError as e:
        raise CliError("invalid-config", str(e)) from None
    result = {
        name: {"rows": r["rows"], "replicated_theta": {k: len(v) for k, v in r["replicated_theta"].items()}}
        for name, r in reports.items()
    }
    if not _list(cfg.get("mode_known")) and not int(cfg.get("replications", 0)):
        (out / "mode_table.csv").write_text(ex.mode_table(reports), encoding="ascii")
        result["mode_table"] = str(out / "mode_table.csv")
    _emit(result)


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate-density": cmd_estimate_density,
    "estimate-mode": cmd_estimate_mode,
    "exact": cmd_exact,
    "oracle-compare": cmd_oracle_compare,
    "count": cmd_count,
    "sip-diag": cmd_sip_diag,
    "experiment": cmd_experiment,
}


# flags whose values may start with "-" (e.g. ``--grid -5:5:0.1``)
RANGE_FLAGS = ("--grid", "--prior", "--rho", "--rhos", "--mode-known", "--sizes")


def _join_range_values(argv: list[str]) -> list[str]:
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in RANGE_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_range_values([str(a) for a in (sys.argv[1:] if argv is None else argv)]))
    try:
        cfg = effective(args)
        status = COMMANDS[args.command](cfg)
    except CliError as e:
        print(json.dumps({"error": e.kind, "message": str(e), **e.extra}), file=sys.stderr)
        return 2
    except PathError as e:
        print(json.dumps({"error": "invalid-path", "condition": e.condition, "message": str(e)}), file=sys.stderr)
        return 2
    except (ValueError, OSError, configparser.Error) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 2
    return status or 0

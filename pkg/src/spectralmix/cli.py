"""Config-driven experiment harness.

Four subcommands (sft-bench, learn-mixture, robust-mean, moments) each read
one JSON config file, run every (seed, sweep point) cell, and append rows to
a CSV or JSON report. Rows are deterministic given config + seed; wall-time
columns are excluded from that contract. Exit codes: 0 success, 2 config
schema error, 3 schedule/feasibility error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .distributions import DistributionSpec, Kind, MixtureModel, sample_mixture, sample_noise_oblivious
from .learners import SfdLearnConfig, coordinate_schedule_eps, learn_sfd_mixture, robust_mean_per_coordinate
from .moments import empirical_moment_tensor, kron_identity_norm_check, laplace_moment_tensor, sym
from .sft1d import ScheduleError, Sft1Config, sft1
from .sftd import match_tones
from .signal import Tone, exact_signal, inject_noise

SCHEMA_VERSION = 1

HEADERS = {
    "sft-bench": "seed,k,d,T,gamma,noise_level,freq_err_max,weight_err_max,queries,success,wall_ms",
    "learn-mixture": "seed,k,d,T,n,gamma,eps,mean_err_max,weight_err_max,success,wall_ms",
    "robust-mean": "seed,d,n,alpha,eps,err,success,wall_ms",
    "moments": "seed,d,r,check,lhs,rhs,abs_diff,success,wall_ms",
}
# Trailing wall-clock column of every report; excluded from determinism.
TIMING_COLUMNS = {"wall_ms"}


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field = field_name


def _require(cfg: dict, name: str, typ, default=None):
    if name not in cfg:
        if default is not None:
            return default
        raise ConfigError(name, "missing")
    val = cfg[name]
    if typ is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, typ):
        raise ConfigError(name, f"expected {typ.__name__}, got {type(val).__name__}")
    return val


def _kind(name: str) -> Kind:
    try:
        return Kind(name)
    except ValueError:
        raise ConfigError("distribution", f"unknown kind {name!r}") from None


# ---------------------------------------------------------------------------
# Experiment cells. Each returns a list of row dicts.
# ---------------------------------------------------------------------------


def _run_sft_bench(cfg: dict, seed: int) -> dict:
    k = _require(cfg, "k", int)
    T = _require(cfg, "T", float)
    B = _require(cfg, "B", float, 6.0)
    gamma = _require(cfg, "gamma", float, 1.0)
    noise = _require(cfg, "noise_level", float, 0.0)
    theta = _require(cfg, "theta", float, 1e-4)
    rng = np.random.default_rng(seed)
    freqs = np.sort(rng.uniform(-B * 0.6, B * 0.6, k))
    while k > 1 and np.diff(freqs).min() < gamma:
        freqs = np.sort(rng.uniform(-B * 0.6, B * 0.6, k))
    weights = rng.uniform(0.3, 1.0, k)
    truth = [Tone(w, f) for w, f in zip(weights, freqs)]
    oracle = exact_signal(truth, T)
    if noise > 0:
        omega = rng.uniform(5 * B, 20 * B)
        oracle = inject_noise(oracle, lambda t, o=omega: noise * np.exp(1j * o * np.asarray(t)), noise * 1.001)
    scfg = Sft1Config(
        k=k, T=T, B=B, gamma=gamma, theta=theta, delta=0.05, seed=seed,
        **cfg.get("sft1_options", {}),
    )
    t0 = time.perf_counter()
    tones, report = sft1(oracle, scfg)
    wall = (time.perf_counter() - t0) * 1e3
    _, mu_err, w_err = match_tones(tones, truth)
    level = math.sqrt(noise**2 + theta * float(weights @ weights))
    tol = cfg.get("success_tol", 30.0) * max(level, 1e-9) / (T * weights.min())
    return {
        "seed": seed, "k": k, "d": 1, "T": T, "gamma": gamma,
        "noise_level": noise, "freq_err_max": mu_err, "weight_err_max": w_err,
        "queries": report.queries, "success": int(mu_err <= tol),
        "wall_ms": round(wall, 3),
    }


def _run_learn_mixture(cfg: dict, seed: int) -> dict:
    k = _require(cfg, "k", int)
    d = _require(cfg, "d", int)
    means = np.asarray(_require(cfg, "means", list), dtype=float)
    weights = np.asarray(cfg.get("weights", [1.0 / k] * k), dtype=float)
    eps = _require(cfg, "eps", float)
    delta = _require(cfg, "delta", float, 0.2)
    model = MixtureModel(Kind.LAPLACE, tuple(zip(weights, means)), d)
    lcfg = SfdLearnConfig(
        k=k, dim=d, gamma=model.separation() if k > 1 else cfg.get("gamma", 1.0),
        w_min=float(weights.min()), B=model.max_mean_norm(), eps=eps, delta=delta,
        C_T=cfg.get("C_T", 4.0), C_n=cfg.get("C_n", 8.0),
        boost_rounds=cfg.get("boost_rounds"), seed=seed,
        sft1_options=cfg.get("sft1_options"),
    )
    X, _ = sample_mixture(model, max(lcfg.n, cfg.get("n_min", 1)), seed=seed)
    base = DistributionSpec(Kind.LAPLACE, d, np.zeros(d))
    t0 = time.perf_counter()
    est = learn_sfd_mixture(X, base, lcfg)
    wall = (time.perf_counter() - t0) * 1e3
    truth = [Tone(w, m) for w, m in zip(weights, means)]
    _, mu_err, w_err = match_tones(est, truth)
    return {
        "seed": seed, "k": k, "d": d, "T": round(lcfg.T, 6), "n": X.shape[0],
        "gamma": round(lcfg.gamma, 6), "eps": eps,
        "mean_err_max": mu_err, "weight_err_max": w_err,
        "success": int(mu_err <= eps and w_err <= eps), "wall_ms": round(wall, 3),
    }


def _run_robust_mean(cfg: dict, seed: int) -> dict:
    d = _require(cfg, "d", int)
    n = _require(cfg, "n", int)
    alpha = _require(cfg, "alpha", float, 0.05)
    kind = _kind(cfg.get("distribution", "laplace"))
    mu = np.asarray(cfg.get("mean", [0.5] * d), dtype=float)
    adversary = np.asarray(cfg.get("adversary", [25.0] * d), dtype=float)
    spec = DistributionSpec(kind, d, np.zeros(d))
    sample = sample_noise_oblivious(spec, mu, [adversary], alpha, n, seed)
    eps = cfg.get("eps") or coordinate_schedule_eps(n, d, kind, 0.1)
    t0 = time.perf_counter()
    est = robust_mean_per_coordinate(sample, kind, eps, 0.1, seed=seed,
                                     reps=cfg.get("reps", 3))
    wall = (time.perf_counter() - t0) * 1e3
    err = float(np.linalg.norm(est - mu))
    return {
        "seed": seed, "d": d, "n": n, "alpha": alpha, "eps": round(eps, 6),
        "err": err, "success": int(err <= eps), "wall_ms": round(wall, 3),
    }


def _run_moments(cfg: dict, seed: int) -> dict:
    d = _require(cfg, "d", int, 2)
    r = _require(cfg, "r", int, 2)
    check = cfg.get("check", "closed-form-vs-mc")
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    if check == "kron-identity":
        t = sym(rng.standard_normal((d,) * r)).entries
        lhs, rhs = kron_identity_norm_check(t, cfg.get("ell", 1))
        diff = abs(lhs - rhs)
        ok = diff <= 1e-12 * max(1.0, rhs)
    elif check == "sym-contraction":
        t = rng.standard_normal((d,) * r)
        lhs = sym(t).entries
        lhs = float(np.sqrt((lhs**2).sum()))
        rhs = float(np.sqrt((t**2).sum()))
        diff = max(0.0, lhs - rhs)
        ok = lhs <= rhs + 1e-12
    else:  # closed-form moment tensor vs Monte-Carlo
        mu = rng.uniform(-1, 1, d)
        spec = DistributionSpec(Kind.LAPLACE, d, mu)
        n = cfg.get("n", 200_000)
        X = spec.sample(n, rng)
        emp = empirical_moment_tensor(X, r).entries
        exact = laplace_moment_tensor(mu, r).entries
        diff = float(np.abs(emp - exact).max())
        scale = 30.0 * float(np.abs(exact).max() + 1.0) / math.sqrt(n)
        lhs, rhs = diff, scale
        ok = diff <= scale
    wall = (time.perf_counter() - t0) * 1e3
    return {
        "seed": seed, "d": d, "r": r, "check": check,
        "lhs": float(lhs), "rhs": float(rhs), "abs_diff": float(diff),
        "success": int(ok), "wall_ms": round(wall, 3),
    }


RUNNERS = {
    "sft-bench": _run_sft_bench,
    "learn-mixture": _run_learn_mixture,
    "robust-mean": _run_robust_mean,
    "moments": _run_moments,
}


def _run_cell(args):
    command, cfg, seed = args
    return RUNNERS[command](cfg, seed)


def _write_report(rows, header: str, out_path: str, fmt: str):
    columns = header.split(",")
    if fmt == "csv":
        exists = os.path.exists(out_path)
        with open(out_path, "a") as fh:
            if not exists:
                fh.write(f"# spectralmix-report schema={SCHEMA_VERSION} lib={__version__}\n")
                fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(_format_cell(row[c]) for c in columns) + "\n")
    else:
        payload = {"schema_version": SCHEMA_VERSION, "library_version": __version__,
                   "rows": rows}
        if os.path.exists(out_path):
            with open(out_path) as fh:
                old = json.load(fh)
            payload["rows"] = old.get("rows", []) + rows
        with open(out_path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True, default=float)
            fh.write("\n")


def _format_cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spectralmix",
        description="Sparse-Fourier estimation experiment harness",
    )
    parser.add_argument("command", choices=sorted(RUNNERS))
    parser.add_argument("config", help="JSON experiment config file")
    parser.add_argument("--seed-base", type=int, default=0)
    parser.add_argument("--trials", type=int, default=1)
    parser.add_argument("--out", required=True)
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument(
        "--jobs", type=int,
        default=int(os.environ.get("SPECTRALMIX_JOBS", "1")),
        help="worker count for trial parallelism (env SPECTRALMIX_JOBS)",
    )
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        cells = [(args.command, cfg, args.seed_base + i) for i in range(args.trials)]
        if args.jobs > 1 and len(cells) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                rows = list(pool.map(_run_cell, cells))
        else:
            rows = [_run_cell(c) for c in cells]
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ScheduleError as exc:
        print(f"error: infeasible schedule: {exc}", file=sys.stderr)
        return 3
    rows.sort(key=lambda r: r["seed"])
    _write_report(rows, HEADERS[args.command], args.out, args.format)
    return 0


if __name__ == "__main__":
    sys.exit(main())

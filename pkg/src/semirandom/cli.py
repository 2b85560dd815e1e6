"""Command-line harness: ``simulate``, ``bounds``, ``lowerbound`` and ``verify``.

Every subcommand accepts ``--config FILE`` (JSON); explicit flags override
the file. Outputs go to ``--out`` and carry the configuration hash and seed
in their file names; run metadata lives in ``*.meta.json`` sidecars.

Exit codes: 0 success, 2 configuration error, 3 runtime failure, 4 a check
requested with ``--assert`` failed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import odelab
from .experiments import SWEEP_COLUMNS, lowerbound_sweep, phased_reference, simulate
from .matching import (MAX_MATCHING_CAP, Digraph, MatchingError, check_certificate,
                       construct_S, is_matching, is_perfect_matching, max_matching,
                       read_matching_csv, write_matching_csv)
from .process import GENERATOR, TRAJECTORY_COLUMNS, git_describe
from .strategies import upper_bound_pipeline

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_ASSERT = 0, 2, 3, 4
STRATEGIES = ("warmup", "phased", "uniform", "pipeline")


class ConfigError(ValueError):
    pass


# --- configuration ----------------------------------------------------------------

DEFAULTS = {
    "simulate": {"strategy": "warmup", "n": 100_000, "seeds": 1, "base_seed": 0,
                 "stop_unsat_frac": 0.01, "phases": 0, "rounds_frac": None,
                 "sample_every": None, "compare_ode": False, "tol": 0.01,
                 "k": 30, "continuation_eps": 1e-2, "cleanup_eps": 1e-3,
                 "max_ratio": 1.30, "export_arcs": False, "workers": 1},
    "bounds": {"k": 1100, "h": odelab.DEFAULT_H, "tol": odelab.EVENT_TOL,
               "convergence": False, "phase_csv": False},
    "lowerbound": {"n": 100_000, "seeds": 1, "base_seed": 0, "grid": 0.01, "t_max": 1.0,
                   "mu": None, "strategy": "uniform", "tol": 0.01, "workers": 1},
    "verify": {"arcs": None, "matching": None, "n": None, "mu": None},
}
# Keys that do not influence results and so stay out of the hash.
UNHASHED = {"workers", "out", "config", "assert_", "command"}


def effective_config(args: argparse.Namespace) -> dict:
    cmd = args.command
    cfg = dict(DEFAULTS[cmd])
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {cmd}: {sorted(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    validate(cmd, cfg)
    return cfg


def _positive(cfg, *keys, allow_none=False):
    for k in keys:
        v = cfg.get(k)
        if v is None and allow_none:
            continue
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0 \
                or not math.isfinite(v):
            raise ConfigError(f"{k} must be a positive number, got {v!r}")


def validate(cmd: str, cfg: dict) -> None:
    if cmd in ("simulate", "lowerbound"):
        n = cfg["n"]
        if not isinstance(n, int) or n < 2 or n % 2:
            raise ConfigError(f"n must be an even integer >= 2, got {n!r}")
        if not isinstance(cfg["seeds"], int) or cfg["seeds"] < 1:
            raise ConfigError("seeds must be a positive integer")
        if not isinstance(cfg["base_seed"], int) or cfg["base_seed"] < 0:
            raise ConfigError("base_seed must be a non-negative integer")
        if not isinstance(cfg["workers"], int) or cfg["workers"] < 1:
            raise ConfigError("workers must be a positive integer")
        _positive(cfg, "tol")
    if cmd == "simulate":
        if cfg["strategy"] not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if not 0 <= cfg["stop_unsat_frac"] < 1:
            raise ConfigError("stop_unsat_frac must lie in [0, 1)")
        if not isinstance(cfg["phases"], int) or cfg["phases"] < 0:
            raise ConfigError("phases must be a non-negative integer")
        if not isinstance(cfg["k"], int) or cfg["k"] < 0:
            raise ConfigError("k must be a non-negative integer")
        _positive(cfg, "rounds_frac", "sample_every", allow_none=True)
        _positive(cfg, "continuation_eps", "cleanup_eps", "max_ratio")
        if cfg["strategy"] == "uniform" and cfg["rounds_frac"] is None:
            raise ConfigError("the uniform strategy needs rounds_frac (it never matches)")
        if cfg["compare_ode"] and cfg["strategy"] in ("uniform", "pipeline"):
            raise ConfigError("--compare-ode applies to the warmup and phased strategies")
    elif cmd == "bounds":
        if not isinstance(cfg["k"], int) or cfg["k"] < 1:
            raise ConfigError("k must be a positive integer")
        _positive(cfg, "h", "tol")
    elif cmd == "lowerbound":
        _positive(cfg, "grid", "t_max")
        _positive(cfg, "mu", allow_none=True)
        if cfg["strategy"] not in ("uniform", "warmup", "phased"):
            raise ConfigError("lowerbound strategy must be uniform, warmup or phased")
    elif cmd == "verify":
        if not cfg["arcs"] or not cfg["matching"]:
            raise ConfigError("verify needs --arcs and --matching")
        _positive(cfg, "mu", allow_none=True)
        if cfg["n"] is not None and (not isinstance(cfg["n"], int) or cfg["n"] < 2):
            raise ConfigError("n must be an integer >= 2")


def config_hash(cmd: str, cfg: dict) -> str:
    text = json.dumps({"command": cmd, **result_config(cfg)}, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def write_meta(path: Path, cmd: str, cfg: dict, digest: str, **extra) -> None:
    meta = {"command": cmd, "config": cfg, "config_hash": digest, "generator": GENERATOR,
            "git_describe": git_describe(), "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    meta.update(extra)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def result_config(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in UNHASHED}


def dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if hasattr(v, "item"):
        return v.item()
    return str(v)


def _nan_to_none(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


def fan_out(fn, jobs, workers: int):
    """Run ``fn`` over ``jobs``; results come back in job order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


# --- simulate -------------------------------------------------------------------------

def _simulate_job(job):
    cfg, seed = job
    if cfg["strategy"] == "pipeline":
        report, state = upper_bound_pipeline(cfg["n"], seed, k=cfg["k"],
                                             continuation_eps=cfg["continuation_eps"],
                                             cleanup_eps=cfg["cleanup_eps"],
                                             return_state=True)
        out = {"report": report.to_dict()}
        if cfg["export_arcs"]:
            out["arcs"] = Digraph.from_state(state).arcs
            out["matching"] = state.matching()
        return out
    phases = cfg["phases"]
    if cfg["strategy"] == "phased" and cfg["compare_ode"] and not phases:
        phases = 5
    cmp = simulate(cfg["n"], seed, cfg["strategy"], cfg["stop_unsat_frac"], phases,
                   cfg["rounds_frac"], cfg["sample_every"], cfg["compare_ode"])
    return {"summary": _nan_to_none(cmp.summary()), "rows": cmp.trajectory.rows}


def cmd_simulate(cfg: dict, out: Path, digest: str) -> tuple[dict, bool]:
    seeds = [cfg["base_seed"] + i for i in range(cfg["seeds"])]
    results = fan_out(_simulate_job, [(cfg, s) for s in seeds], cfg["workers"])
    n = cfg["n"]
    runs = []
    ok = True
    for seed, res in zip(seeds, results):
        stem = f"{cfg['strategy']}-{digest}-seed{seed}"
        if "report" in res:
            rep = res["report"]
            dump(out / f"{stem}.json", rep)
            if "arcs" in res:
                Digraph(n, res["arcs"]).write_csv(out / f"{stem}-arcs.csv")
                write_matching_csv(out / f"{stem}-matching.csv", res["matching"])
            write_meta(out / f"{stem}.meta.json", "simulate", cfg, digest, seed=seed, n=n,
                       strategy="pipeline")
            runs.append(rep)
            ok &= rep["perfect"] and rep["total_rounds"] / n <= cfg["max_ratio"]
            continue
        _write_trajectory(out / f"{stem}.csv", res["rows"])
        summ = res["summary"]
        if summ["phase_boundaries"]:
            _write_phases(out / f"{stem}-phases.csv", summ["phase_boundaries"], n)
        write_meta(out / f"{stem}.meta.json", "simulate", cfg, digest, seed=seed, n=n,
                   strategy=cfg["strategy"])
        runs.append(summ)
        if cfg["compare_ode"]:
            ok &= summ["max_dx"] <= cfg["tol"] and summ["max_dr"] <= cfg["tol"]
    summary = {"command": "simulate", "config_hash": digest, "config": result_config(cfg),
               "runs": runs}
    if cfg["strategy"] == "pipeline":
        ratios = [r["total_rounds"] / n for r in runs]
        summary["aggregate"] = {"perfect": sum(r["perfect"] for r in runs),
                                "max_ratio": max(ratios), "mean_ratio": sum(ratios) / len(ratios)}
    elif cfg["compare_ode"]:
        summary["aggregate"] = {
            "max_dx": max(r["max_dx"] for r in runs),
            "mean_dx": sum(r["max_dx"] for r in runs) / len(runs),
            "max_dr": max(r["max_dr"] for r in runs),
            "mean_dr": sum(r["max_dr"] for r in runs) / len(runs)}
    dump(out / f"summary-simulate-{digest}.json", summary)
    return summary, ok


def _write_trajectory(path: Path, rows) -> None:
    extra = sorted({k for r in rows for k in r} - set(TRAJECTORY_COLUMNS))
    cols = list(TRAJECTORY_COLUMNS) + extra
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([r.get(c, "") for c in cols])


def _write_phases(path: Path, bounds, n) -> None:
    cascade = phased_reference(len(bounds))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("q", "tau", "tau_over_n", "c_q"))
        for q, tau in enumerate(bounds, 1):
            w.writerow((q, tau, repr(tau / n), repr(cascade.c[q - 1])))


# --- bounds ---------------------------------------------------------------------------

def cmd_bounds(cfg: dict, out: Path, digest: str) -> tuple[dict, bool]:
    report = odelab.compute_bounds(cfg["k"], cfg["h"], cfg["tol"], cfg["convergence"])
    data = report.to_dict()
    data["published_constants"] = {"alpha": odelab.PUBLISHED_ALPHA, "beta": odelab.PUBLISHED_BETA,
                               "c_k": odelab.PUBLISHED_CK,
                               "continuation": odelab.PUBLISHED_CONTINUATION}
    data["config_hash"] = digest
    dump(out / f"bounds-{digest}.json", data)
    if cfg["phase_csv"]:
        cascade = odelab.phase_cascade(cfg["k"], cfg["h"], event_tol=cfg["tol"])
        with open(out / f"phases-{digest}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("q", "c_q", "x", "y"))
            for row in cascade.rows():
                w.writerow([row[0]] + [repr(v) for v in row[1:]])
    ok = 0.93261 <= report.alpha <= 0.93262
    if not report.partial:
        ok &= (report.c_k <= odelab.PUBLISHED_CK and 1 - report.x_k <= 1e-6
               and report.continuation_time <= odelab.PUBLISHED_CONTINUATION
               and report.beta <= odelab.PUBLISHED_BETA + 1e-5)
    return data, ok


# --- lowerbound -------------------------------------------------------------------------

def _lowerbound_job(job):
    cfg, seed = job
    sweep = lowerbound_sweep(cfg["n"], seed, cfg["grid"], cfg["t_max"], cfg["mu"],
                             cfg["strategy"])
    return {"summary": sweep.summary(), "rows": sweep.rows}


def cmd_lowerbound(cfg: dict, out: Path, digest: str) -> tuple[dict, bool]:
    seeds = [cfg["base_seed"] + i for i in range(cfg["seeds"])]
    results = fan_out(_lowerbound_job, [(cfg, s) for s in seeds], cfg["workers"])
    runs = []
    for seed, res in zip(seeds, results):
        stem = f"lowerbound-{digest}-seed{seed}"
        with open(out / f"{stem}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SWEEP_COLUMNS)
            for r in res["rows"]:
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c]
                            for c in SWEEP_COLUMNS])
        write_meta(out / f"{stem}.meta.json", "lowerbound", cfg, digest, seed=seed)
        runs.append(res["summary"])
        if res["summary"]["warning"]:
            print(f"warning: {res['summary']['warning']}", file=sys.stderr)
    alpha = odelab.find_alpha(1e-10)
    flips = [r["flip"] for r in runs]
    summary = {"command": "lowerbound", "config_hash": digest, "config": result_config(cfg),
               "alpha": alpha,
               "runs": runs, "flip_min": min(flips), "flip_max": max(flips)}
    dump(out / f"summary-lowerbound-{digest}.json", summary)
    ok = all(abs(f - alpha) <= cfg["tol"] for f in flips)
    return summary, ok


# --- verify -----------------------------------------------------------------------------

def cmd_verify(cfg: dict, out: Path, digest: str) -> tuple[dict, bool]:
    try:
        graph = Digraph.from_csv(cfg["arcs"], cfg["n"])
        pairs = read_matching_csv(cfg["matching"])
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read inputs: {exc}") from exc
    n = graph.n
    perfect = is_perfect_matching(graph, pairs)
    verdict = {"n": n, "m": graph.m, "simple": graph.is_simple(),
               "is_matching": is_matching(graph, pairs), "matching_size": len(pairs),
               "perfect": perfect}
    if n <= MAX_MATCHING_CAP:
        verdict["max_matching_size"] = len(max_matching(graph))
    if perfect:
        mu = cfg["mu"] if cfg["mu"] is not None else math.sqrt(n)
        cert = construct_S(graph, pairs, mu)
        verdict["certificate"] = cert.to_dict() | {"valid": check_certificate(graph, cert)}
    return verdict, perfect


# --- entry point ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semirandom", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeds=True):
        sp.add_argument("--config", help="JSON file with parameters (flags override it)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--assert", dest="assert_", action="store_true",
                        help="exit with code 4 if the built-in checks fail")
        if seeds:
            sp.add_argument("--n", type=int)
            sp.add_argument("--seeds", type=int, help="number of runs")
            sp.add_argument("--base-seed", type=int, help="seed of run 0; run i uses base+i")
            sp.add_argument("--workers", type=int, help="parallel worker processes")
            sp.add_argument("--tol", type=float, help="tolerance for --assert")

    s = sub.add_parser("simulate", help="run strategies and record trajectories")
    common(s)
    s.add_argument("--strategy", choices=STRATEGIES)
    s.add_argument("--stop-unsat-frac", type=float)
    s.add_argument("--phases", type=int, help="phased: stop after this many phases")
    s.add_argument("--rounds-frac", type=float, help="stop after this many rounds / n")
    s.add_argument("--sample-every", type=int)
    s.add_argument("--compare-ode", action="store_const", const=True)
    s.add_argument("--k", type=int, help="pipeline: phase count")
    s.add_argument("--continuation-eps", type=float)
    s.add_argument("--cleanup-eps", type=float)
    s.add_argument("--max-ratio", type=float, help="pipeline: rounds/n allowed by --assert")
    s.add_argument("--export-arcs", action="store_const", const=True)

    b = sub.add_parser("bounds", help="compute the upper and lower bound constants")
    common(b, seeds=False)
    b.add_argument("--k", type=int)
    b.add_argument("--h", type=float)
    b.add_argument("--tol", type=float)
    b.add_argument("--convergence", action="store_const", const=True,
                   help="rerun at h/2 and report the deltas")
    b.add_argument("--phase-csv", action="store_const", const=True)

    lb = sub.add_parser("lowerbound", help="certificate sweep under a circle strategy")
    common(lb)
    lb.add_argument("--grid", type=float)
    lb.add_argument("--t-max", type=float)
    lb.add_argument("--mu", type=float)
    lb.add_argument("--strategy", choices=("uniform", "warmup", "phased"))

    v = sub.add_parser("verify", help="check a matching against an arc list")
    common(v, seeds=False)
    v.add_argument("--arcs")
    v.add_argument("--matching")
    v.add_argument("--n", type=int)
    v.add_argument("--mu", type=float)
    return p


COMMANDS = {"simulate": cmd_simulate, "bounds": cmd_bounds, "lowerbound": cmd_lowerbound,
            "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    digest = config_hash(args.command, cfg)
    try:
        result, ok = COMMANDS[args.command](cfg, out, digest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, MatchingError, ValueError, ArithmeticError) as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(result, indent=2, sort_keys=True, default=_jsonable))
    if args.assert_ and not ok:
        print("assertion check failed", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

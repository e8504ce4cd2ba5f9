"""Configuration-driven command line: simulate, verify <suite>, ensemble.

Exit codes are stable API: 0 success (verify: verdict pass), 1 verdict
fail, 2 config error, 3 audit failure, 4 runtime solver failure.  Every
failure prints one machine-parsable line to stderr:

    srds-error: code=<n> kind=<config|audit|runtime> reason=<token> detail=...
"""

from __future__ import annotations

import argparse
import csv
import functools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from ._version import __version__
from .config import build_problem, config_digest, load_config, preset, validate_config
from .errors import AuditError, ConfigError, SolverFailure
from .rng import sample_path
from .solver import save_trajectory, simulate
from .verify import SUITES, run_suite

EXIT_OK = 0
EXIT_VERDICT_FAIL = 1
EXIT_CONFIG = 2
EXIT_AUDIT = 3
EXIT_RUNTIME = 4


def _fail(code: int, kind: str, reason: str, detail: str = "") -> int:
    print(f"srds-error: code={code} kind={kind} reason={reason} detail={detail}",
          file=sys.stderr)
    return code


def _load(args) -> dict:
    if args.config and args.preset:
        raise ConfigError("flags", "--config and --preset are mutually exclusive")
    if args.preset:
        cfg = preset(args.preset)
    elif args.config:
        cfg = load_config(args.config)
    else:
        raise ConfigError("flags", "one of --config or --preset is required")
    if args.seed is not None:
        cfg["master_seed"] = int(args.seed)
    return validate_config(cfg)


def _out_dir(args, cfg: dict, command: str) -> Path:
    root = (args.out or cfg.get("output", {}).get("dir")
            or os.environ.get("SRDS_OUT") or "srds-out")
    digest = config_digest(cfg)
    d = Path(root) / f"{command}-{digest[:12]}-seed{cfg['master_seed']}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_config_copy(out: Path, cfg: dict) -> None:
    with open(out / "config.json", "w") as fh:
        json.dump(cfg, fh, sort_keys=True, indent=1)


def _make_path_for(cfg: dict, problem, solver_cfg, path_index: int):
    dt_fine = cfg["noise"].get("dt_fine") or solver_cfg.dt
    ratio = solver_cfg.dt / dt_fine
    j = round(np.log2(ratio)) if ratio >= 1 else -1
    if j < 0 or abs(ratio - 2.0**j) > 1e-9 * ratio:
        raise ConfigError("noise",
                          f"dt={solver_cfg.dt} must be a power-of-two multiple "
                          f"of dt_fine={dt_fine}")
    n_fine = solver_cfg.n_steps * (1 << j)
    return sample_path(cfg["master_seed"], problem.r, problem.noise.modes,
                       n_fine, dt_fine, path_index=path_index)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    problem, initial, solver_cfg = build_problem(cfg)
    # snapshot stride: about 64 stored samples per run unless configured
    out_stride = cfg.get("output", {}).get("stride")
    if out_stride is None:
        out_stride = max(1, solver_cfg.n_steps // 64)
    solver_cfg = replace(solver_cfg, store_stride=int(out_stride))
    path = _make_path_for(cfg, problem, solver_cfg, path_index=args.path_index)
    traj = simulate(problem, solver_cfg, path, initial)
    out = _out_dir(args, cfg, "simulate")
    _write_config_copy(out, cfg)
    fmt = (cfg.get("output", {}).get("formats") or ["auto"])[0]
    save_trajectory(traj, out, fmt=fmt, grid=problem.grid)
    manifest_extra = {
        "config_digest": config_digest(cfg),
        "master_seed": cfg["master_seed"],
        "tool_version": __version__,
    }
    with open(out / "run.json", "w") as fh:
        json.dump(manifest_extra, fh, sort_keys=True, indent=1)
    stop = traj.stopping
    if stop.triggered:
        print(f"stopped: level {stop.level:g} exceeded at t={stop.time:g} "
              f"(step {stop.step_index})")
    else:
        print(f"completed: t_end={solver_cfg.t_end:g}, "
              f"final E-norm {traj.e_norms()[-1]:.6g}")
    print(f"artifacts: {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    problem, initial, solver_cfg = build_problem(cfg)
    params = dict(cfg.get("experiment", {}))
    if params.get("name") not in (None, args.suite):
        params = {}  # the block configures a different experiment
    report = run_suite(args.suite, problem, solver_cfg, initial, params,
                       cfg["master_seed"])
    out = _out_dir(args, cfg, f"verify-{args.suite}")
    _write_config_copy(out, cfg)
    report.provenance["config_digest"] = config_digest(cfg)
    report.write(out)
    report.print_summary()
    print(f"verdict: {'pass' if report.verdict else 'fail'}")
    print(f"artifacts: {out}")
    return EXIT_OK if report.verdict else EXIT_VERDICT_FAIL


@functools.lru_cache(maxsize=4)
def _cached_problem(cfg_blob: str):
    return build_problem(json.loads(cfg_blob))


def _path_stats(cfg_blob: str, path_index: int) -> dict:
    problem, initial, solver_cfg = _cached_problem(cfg_blob)
    cfg = json.loads(cfg_blob)
    dt_fine = cfg["noise"].get("dt_fine") or solver_cfg.dt
    j = round(np.log2(solver_cfg.dt / dt_fine))
    path = sample_path(cfg["master_seed"], problem.r, problem.noise.modes,
                       solver_cfg.n_steps * (1 << j), dt_fine,
                       path_index=path_index)
    traj = simulate(problem, solver_cfg, path, initial)
    e = traj.e_norms()
    return {
        "path": path_index,
        "final_e_norm": float(e[-1]),
        "sup_e_norm": float(e.max()),
        "global_min": float(traj.min_values.min()),
        "stopped": int(traj.stopping.triggered),
        "stop_time": float(traj.stopping.time),
    }


def cmd_ensemble(args) -> int:
    cfg = _load(args)
    if args.paths < 1:
        raise ConfigError("flags", "--paths must be >= 1")
    build_problem(cfg)  # run all audits before spawning workers
    cfg_blob = json.dumps(cfg, sort_keys=True)
    indices = list(range(args.paths))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            stats = list(pool.map(functools.partial(_path_stats, cfg_blob), indices))
    else:
        stats = [_path_stats(cfg_blob, i) for i in indices]
    stats.sort(key=lambda s: s["path"])  # order-independent aggregation

    out = _out_dir(args, cfg, "ensemble")
    _write_config_copy(out, cfg)
    keys = ["final_e_norm", "sup_e_norm", "global_min"]
    with open(out / "paths.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path"] + keys + ["stopped", "stop_time"])
        for s in stats:
            w.writerow([s["path"]] + [repr(s[k]) for k in keys]
                       + [s["stopped"], repr(s["stop_time"])])
    with open(out / "aggregate.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["statistic"] + keys + ["stopped_fraction"])
        arr = {k: np.array([s[k] for s in stats]) for k in keys}
        stopped = np.array([s["stopped"] for s in stats], dtype=float)
        w.writerow(["mean"] + [repr(float(arr[k].mean())) for k in keys]
                   + [repr(float(stopped.mean()))])
        w.writerow(["std"] + [repr(float(arr[k].std(ddof=1)) if args.paths > 1 else 0.0)
                              for k in keys] + [""])
        w.writerow(["min"] + [repr(float(arr[k].min())) for k in keys] + [""])
        w.writerow(["max"] + [repr(float(arr[k].max())) for k in keys] + [""])
    with open(out / "run.json", "w") as fh:
        json.dump({"config_digest": config_digest(cfg),
                   "master_seed": cfg["master_seed"],
                   "n_paths": args.paths,
                   "tool_version": __version__}, fh, sort_keys=True, indent=1)
    print(f"ensemble: {args.paths} paths, stopped fraction "
          f"{float(stopped.mean()):.3g}")
    print(f"artifacts: {out}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run-config JSON file")
    p.add_argument("--preset", help="named preset (fhn)")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--out", default=None,
                   help="output root (default $SRDS_OUT or ./srds-out)")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="srds",
        description="Stochastic reaction-diffusion simulator and "
                    "property-verification harness")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one path and write snapshots")
    _add_common(p_sim)
    p_sim.add_argument("--path-index", type=int, default=0)
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="run a named verification suite")
    p_ver.add_argument("suite", choices=SUITES)
    _add_common(p_ver)
    p_ver.set_defaults(func=cmd_verify)

    p_ens = sub.add_parser("ensemble", help="run many paths with derived seeds")
    _add_common(p_ens)
    p_ens.add_argument("--paths", type=int, default=16)
    p_ens.add_argument("--workers", type=int, default=1)
    p_ens.set_defaults(func=cmd_ensemble)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc.reason, exc.detail)
    except AuditError as exc:
        return _fail(EXIT_AUDIT, "audit", exc.reason, exc.detail)
    except SolverFailure as exc:
        return _fail(EXIT_RUNTIME, "runtime", exc.reason, exc.detail)


if __name__ == "__main__":
    sys.exit(main())

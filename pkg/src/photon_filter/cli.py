"""Command-line interface.

Four subcommands, each driven by a JSON config file:

    photon-filter master     --config run.json [--out DIR]
    photon-filter trajectory --config run.json [--out DIR] [--seed N]
    photon-filter ensemble   --config run.json [--out DIR] [--seed N] [--n-traj N]
    photon-filter validate   --config run.json [--out DIR]

Every run writes a ``report.json`` (config echo, invariant summary, check
outcomes) and mode-specific CSV artifacts. Artifacts are byte-identical for
identical (config, seed) pairs regardless of thread count; wall-clock
timings appear on the console only. ``validate`` exits nonzero when any
check fails.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, validation
from .config import RunConfig, load_raw
from .errors import ConfigError, PhotonFilterError
from .filtering import run_ensemble, run_trajectory
from .master import integrate_master
from .superops import BLOCK_ORDER

FLOAT_FMT = "%.17g"


def _fmt(value: float) -> str:
    return FLOAT_FMT % float(value)


def _write_csv(path: Path, header: list, columns: list) -> None:
    """Comma-separated table, 17-significant-digit floats, one header row."""
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ValueError("csv columns have mismatched lengths")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


def _write_report(outdir: Path, config: RunConfig, body: dict) -> Path:
    payload = {"version": __version__, "config": config.echo}
    payload.update(body)
    path = outdir / "report.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="ascii")
    return path


def _outdir(config: RunConfig, args) -> Path:
    out = Path(args.out) if args.out else config.output
    out.mkdir(parents=True, exist_ok=True)
    return out


def _merge_overrides(raw: dict, args) -> dict:
    """Fold command-line overrides into the raw config before validation."""
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    if getattr(args, "n_traj", None) is not None:
        raw["n_traj"] = args.n_traj
    if args.out:
        raw["output"] = str(args.out)     # resolved dir; never echoed
    return raw


def _require_mode(raw: dict, mode: str) -> None:
    declared = raw.get("mode")
    if declared is not None and declared != mode:
        raise ConfigError(
            f"config declares mode '{declared}' but the '{mode}' "
            "subcommand was invoked; make them agree")
    raw["mode"] = mode


def _cmd_master(config: RunConfig, args) -> int:
    outdir = _outdir(config, args)
    t0 = time.perf_counter()
    run = integrate_master(config.system, config.pulse, config.eta,
                           dt=config.dt_ode, horizon=config.horizon,
                           observables=config.observables)
    wall = time.perf_counter() - t0

    header = ["t"]
    columns = [run.times]
    for name in config.observables:
        series = run.expectations[name]          # (4, n+1), BLOCK_ORDER rows
        for row, block in enumerate(BLOCK_ORDER):
            header += [f"mu{block}_{name}_re", f"mu{block}_{name}_im"]
            columns += [series[row].real, series[row].imag]
    csv_path = outdir / "master.csv"
    _write_csv(csv_path, header, columns)

    report = _write_report(outdir, config, {
        "mode": "master",
        "invariants": run.invariants.as_dict(),
        "grid_points": int(run.times.size),
    })
    print(f"master: {run.times.size} grid points in {wall:.2f}s")
    print(f"  max trace deviation {run.invariants.max_trace_dev_11:.2e} (11), "
          f"{run.invariants.max_trace_dev_00:.2e} (00)")
    print(f"  wrote {csv_path} and {report}")
    return 0


def _cmd_trajectory(config: RunConfig, args) -> int:
    outdir = _outdir(config, args)
    t0 = time.perf_counter()
    run = run_trajectory(config.system, config.pulse, config.eta,
                         dt=config.dt_sde, horizon=config.horizon,
                         seed=config.seed, observables=config.observables,
                         w_floor=config.w_floor,
                         cross_check_tol=config.cross_check_tol)
    wall = time.perf_counter() - t0

    header = ["t"]
    columns = [run.times]
    for name in config.observables:
        header += [f"pi11_{name}", f"cross_{name}"]
        columns += [run.pi11[name], run.cross_check[name]]
    y_path = run.record.y_path()[::run.stride]
    header += ["Y", "W"]
    columns += [y_path, run.innovations_path]
    csv_path = outdir / "trajectory.csv"
    _write_csv(csv_path, header, columns)

    record_path = outdir / "record.txt"
    run.record.save(record_path)

    report = _write_report(outdir, config, {
        "mode": "trajectory",
        "diagnostics": {k: float(v) for k, v in sorted(run.diagnostics.items())},
        "sup_divergence": {k: float(v) for k, v in sorted(run.sup_divergence.items())},
        "flagged": {k: bool(v) for k, v in sorted(run.flagged.items())},
        "innovation_total": run.innovation_total(),
        "steps": int(run.record.n),
        "stored_points": int(run.times.size),
    })
    print(f"trajectory: {run.record.n} steps in {wall:.2f}s "
          f"({run.times.size} stored)")
    worst = max(run.sup_divergence.values()) if run.sup_divergence else 0.0
    print(f"  filter/source divergence sup {worst:.2e} "
          f"(tol {config.cross_check_tol:g})"
          + (" FLAGGED" if any(run.flagged.values()) else ""))
    print(f"  wrote {csv_path}, {record_path}, and {report}")
    return 0


def _cmd_ensemble(config: RunConfig, args) -> int:
    outdir = _outdir(config, args)
    t0 = time.perf_counter()
    ens = run_ensemble(config.system, config.pulse, config.eta,
                       dt=config.dt_sde, horizon=config.horizon,
                       n_traj=config.n_traj, seed=config.seed,
                       observables=config.observables,
                       w_floor=config.w_floor, n_threads=config.n_threads)
    wall = time.perf_counter() - t0
    reference = integrate_master(config.system, config.pulse, config.eta,
                                 dt=config.dt_ode, horizon=config.horizon,
                                 observables=config.observables)

    # Deterministic reference at the stored stochastic grid times.
    ref_idx = np.clip(np.rint(ens.times / config.dt_ode).astype(int),
                      0, reference.times.size - 1)
    header = ["t"]
    columns = [ens.times]
    for name in config.observables:
        header += [f"mean_{name}", f"stderr_{name}", f"mu11_{name}"]
        columns += [ens.mean[name], ens.stderr[name],
                    reference.expectations[name][0].real[ref_idx]]
    csv_path = outdir / "ensemble.csv"
    _write_csv(csv_path, header, columns)

    w = ens.final_innovations
    report = _write_report(outdir, config, {
        "mode": "ensemble",
        "diagnostics": {k: float(v) for k, v in sorted(ens.diagnostics.items())},
        "sup_divergence": {k: float(v) for k, v in sorted(ens.sup_divergence.items())},
        "innovation_mean": float(np.mean(w)),
        "innovation_var": float(np.var(w, ddof=1)),
        "n_traj": int(ens.n_traj),
        "stored_points": int(ens.times.size),
    })
    print(f"ensemble: {ens.n_traj} trajectories in {wall:.2f}s")
    print(f"  innovation mean {np.mean(w):+.4f}, variance {np.var(w, ddof=1):.4f} "
          f"(horizon {config.horizon:g})")
    print(f"  wrote {csv_path} and {report}")
    return 0


def _cmd_validate(config: RunConfig, args) -> int:
    outdir = _outdir(config, args)
    results = validation.run_acceptance(checks=config.checks, log=print)
    body = {"mode": "validate"}
    body.update(validation.report_payload(results))
    report = _write_report(outdir, config, body)
    n_pass = sum(r.passed for r in results)
    print(f"validate: {n_pass}/{len(results)} checks passed; wrote {report}")
    return 0 if n_pass == len(results) else 1


_COMMANDS = {
    "master": _cmd_master,
    "trajectory": _cmd_trajectory,
    "ensemble": _cmd_ensemble,
    "validate": _cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photon-filter",
        description=("Simulate a quantum system driven by a single-photon "
                     "wavepacket: deterministic averages, conditional "
                     "filtering on homodyne records, and built-in checks."))
    parser.add_argument("--version", action="version",
                        version=f"photon-filter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("master", "integrate the coupled master equations"),
            ("trajectory", "run one conditional filter trajectory"),
            ("ensemble", "run many filter trajectories and average"),
            ("validate", "run the built-in acceptance checks")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory")
        if name in ("trajectory", "ensemble"):
            p.add_argument("--seed", type=int, default=None,
                           help="override the config seed")
        if name == "ensemble":
            p.add_argument("--n-traj", type=int, default=None,
                           help="override the trajectory count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_raw(args.config)
        _require_mode(raw, args.command)
        config = RunConfig.from_dict(_merge_overrides(raw, args))
        return _COMMANDS[args.command](config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PhotonFilterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

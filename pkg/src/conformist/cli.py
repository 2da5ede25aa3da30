"""Command-line entry point: run, batch, verify, and check-dist.

Configuration flows through a JSON file plus ``--set key=value``
overrides; there is no environment-variable surface. Exit codes: 0
success, 1 runtime failure, 2 configuration error, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .diagnostics import batch_run
from .distributions import (
    Region,
    estimate_regularity,
    estimate_tail_constant,
    make_sampler,
    spec_from_json,
)
from .engine import RunConfig, config_from_json, run, stream_for
from .errors import ConfigError, Error

_CONFIG_KEYS = (
    "N",
    "K",
    "dim",
    "dist",
    "seed",
    "max_steps",
    "tol_F",
    "move_window",
    "tol_move",
    "diverge_radius",
    "initial_points",
    "osc_interval",
    "osc_min_crossings",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conformist",
        description=(
            "Simulate and verify the iterated minimum-variance core selection "
            "process with stochastic replacement."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config field (value parsed as JSON when possible)",
        )

    p_run = sub.add_parser("run", help="one trajectory: CSV + summary JSON")
    common(p_run)
    p_run.add_argument("--thin", type=int, default=1, help="CSV row stride")

    p_batch = sub.add_parser("batch", help="many replicas: batch summary + per-run summaries")
    common(p_batch)
    p_batch.add_argument("--runs", type=int, required=True, help="number of replicas")
    p_batch.add_argument("--jobs", type=int, default=1, help="worker processes")

    p_verify = sub.add_parser("verify", help="re-check invariants over produced artifacts")
    p_verify.add_argument("path", help="directory containing run or batch output")
    p_verify.add_argument("--out", default=None, help="where to write violations.csv")

    p_check = sub.add_parser("check-dist", help="distribution assumption reports")
    p_check.add_argument("--config", required=True, help="JSON check configuration")
    p_check.add_argument("--out", required=True, help="output directory")
    p_check.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def _apply_overrides(obj: dict, overrides: list[str], seed: int | None) -> dict:
    out = dict(obj)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config field {key!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    if seed is not None:
        out["seed"] = seed
    return out


def _load_run_config(args) -> RunConfig:
    obj = _apply_overrides(_load_json(args.config), args.overrides, args.seed)
    unknown = set(obj) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    try:
        return config_from_json(obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_run(args) -> int:
    config = _load_run_config(args)
    if args.thin < 1:
        raise ConfigError("--thin must be >= 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj = run(config)
    io.write_trajectory_csv(traj, out_dir / "trajectory.csv", thin=args.thin)
    io.write_json(io.run_summary_dict(traj, replica=0, thin=args.thin), out_dir / "summary.json")
    return 0


def _cmd_batch(args) -> int:
    config = _load_run_config(args)
    if args.runs < 1:
        raise ConfigError("--runs must be >= 1")
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = batch_run(config, args.runs, jobs=args.jobs)
    io.write_json(io.batch_summary_dict(summary, config), out_dir / "batch_summary.json")
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(exist_ok=True)
    for entry in summary.runs:
        run_dir = runs_dir / f"run_{entry['replica']:04d}"
        run_dir.mkdir(exist_ok=True)
        io.write_json(io.batch_run_entry_dict(config, entry), run_dir / "summary.json")
    return 0


def _cmd_verify(args) -> int:
    root = Path(args.path)
    if not root.is_dir():
        raise ConfigError(f"not a directory: {root}")
    violations, checked = io.verify_tree(root)
    out_dir = Path(args.out) if args.out else root
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_violations_csv(violations, out_dir / "violations.csv")
    print(f"checked {checked} artifacts, {len(violations)} violations")
    return 3 if violations else 0


def _cmd_check_dist(args) -> int:
    obj = _load_json(args.config)
    if "dist" not in obj:
        raise ConfigError("check-dist config needs a 'dist' entry")
    spec = spec_from_json(obj["dist"])
    sampler = make_sampler(spec)
    seed = args.seed if args.seed is not None else obj.get("seed", 0)
    n_samples = int(obj.get("n_samples", 10**5))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    wrote = False

    reg = obj.get("regularity")
    if reg:
        region_obj = reg.get("region", {})
        if "interval" in region_obj:
            region = Region.from_interval(*region_obj["interval"])
        else:
            region = Region(
                center=tuple(float(v) for v in region_obj["center"]),
                radius=float(region_obj["radius"]),
            )
        report = estimate_regularity(
            sampler,
            region,
            delta=float(reg["delta"]),
            r_list=[float(r) for r in reg["r_list"]],
            probe_points=reg["probes"],
            n_samples=int(reg.get("n_samples", n_samples)),
            rng=stream_for(seed, 0),
        )
        io.write_json(
            {
                "dist": spec.to_json_dict(),
                "region": {"center": list(report.region.center), "radius": report.region.radius},
                "delta": report.delta,
                "r_max": report.r_max,
                "sigma_hat": report.sigma_hat,
                "n_samples": report.n_samples,
                "conditional_counts": list(report.conditional_counts),
            },
            out_dir / "regularity.json",
        )
        wrote = True

    tail = obj.get("tail")
    if tail:
        report = estimate_tail_constant(
            sampler,
            r_plus=float(tail["R_plus"]),
            r_minus=float(tail["R_minus"]),
            grid=[(float(a), float(u)) for a, u in tail["grid"]],
            n_samples=int(tail.get("n_samples", n_samples)),
            rng=stream_for(seed, 1),
        )
        io.write_json(
            {
                "dist": spec.to_json_dict(),
                "R_plus": report.r_plus,
                "R_minus": report.r_minus,
                "C_hat": report.c_hat,
                "grid": [list(pair) for pair in report.grid],
                "worst_pair": None if report.worst_pair is None else list(report.worst_pair),
                "n_samples": report.n_samples,
                "pairs": list(report.pairs),
            },
            out_dir / "tail.json",
        )
        wrote = True

    if not wrote:
        raise ConfigError("check-dist config needs a 'regularity' or 'tail' section")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    np.seterr(all="ignore")
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "batch":
            return _cmd_batch(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "check-dist":
            return _cmd_check_dist(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()

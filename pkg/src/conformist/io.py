"""File formats: trajectory CSV, run and batch summary JSON, violation
reports, and the directory verifier.

Output is byte-stable across identical invocations: fields appear in a
fixed order, floats use shortest round-trip formatting (Python repr,
at most 17 significant digits), lines end with a bare newline, and no
timestamps or absolute paths are embedded.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .diagnostics import BatchSummary
from .engine import RunConfig, Trajectory, config_from_json

_STOP_REASONS = {0: "budget", 1: "converged", 2: "diverged"}
_REL = 1e-9
_ABS = 1e-15


def _fmt(x: float) -> str:
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n", encoding="utf-8")


def trajectory_header(dim: int) -> str:
    mu_cols = ",".join(f"mu_{j}" for j in range(dim))
    return f"t,F,D,{mu_cols},core_changed,rejected,tie_count"


def write_trajectory_csv(traj: Trajectory, path: Path, thin: int = 1) -> None:
    """One row per recorded step; with thin > 1, every thin-th step plus
    the final one."""
    if thin < 1:
        raise ValueError("thin must be >= 1")
    d = traj.config.dim
    last = len(traj) - 1
    lines = [trajectory_header(d)]
    for t in range(len(traj)):
        if t % thin and t != last:
            continue
        mu = ",".join(_fmt(traj.mu[t, j]) for j in range(d))
        lines.append(
            f"{t},{_fmt(traj.F[t])},{_fmt(traj.D[t])},{mu},"
            f"{int(traj.core_changed[t])},{int(traj.rejected[t])},{int(traj.tie_count[t])}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trajectory_csv(path: Path) -> dict:
    text = path.read_text(encoding="utf-8").strip().split("\n")
    header = text[0].split(",")
    if header[0] != "t" or "core_changed" not in header:
        raise ValueError(f"{path}: not a trajectory CSV")
    d = header.index("core_changed") - 3
    rows = [line.split(",") for line in text[1:]]
    t = np.array([int(r[0]) for r in rows], dtype=np.int64)
    f = np.array([float(r[1]) for r in rows])
    dd = np.array([float(r[2]) for r in rows])
    mu = np.array([[float(r[3 + j]) for j in range(d)] for r in rows])
    changed = np.array([int(r[3 + d]) for r in rows], dtype=bool)
    rejected = np.array([int(r[4 + d]) for r in rows], dtype=bool)
    ties = np.array([int(r[5 + d]) for r in rows], dtype=np.int64)
    return {
        "t": t,
        "F": f,
        "D": dd,
        "mu": mu,
        "core_changed": changed,
        "rejected": rejected,
        "tie_count": ties,
    }


def run_summary_dict(traj: Trajectory, replica: int, thin: int) -> dict:
    from .diagnostics import NOT_APPLICABLE, check_monotone, check_rejection, check_sandwich

    rej = check_rejection(traj)
    out = traj.outcome
    return {
        "config": traj.config.to_json_dict(),
        "replica": replica,
        "outcome": {
            "kind": out.kind,
            "phi": None if out.phi is None else [float(v) for v in out.phi],
            "evidence": out.evidence,
        },
        "assumption_2k_lt_n": traj.config.assumption_2k_lt_n,
        "initial_points_unverified": traj.initial_points_unverified,
        "stop_reason": _STOP_REASONS[traj.stop_code],
        "steps_recorded": len(traj),
        "violations": {
            "monotone": len(check_monotone(traj)),
            "sandwich": len(check_sandwich(traj)),
            "rejection_triggers": None if rej is NOT_APPLICABLE else rej[0],
            "rejection_violations": None if rej is NOT_APPLICABLE else rej[1],
        },
        "thin": thin,
    }


def batch_summary_dict(summary: BatchSummary, config: RunConfig) -> dict:
    return {
        "config": config.to_json_dict(),
        "replicas": list(summary.replicas),
        "n_runs": summary.n_runs,
        "outcome_counts": summary.outcome_counts,
        "f_quantiles_at_checkpoints": list(summary.f_quantiles_at_checkpoints),
        "mean_time_to_tol_f": summary.mean_time_to_tol_f,
        "reached_tol_f": summary.reached_tol_f,
        "violation_counts": summary.violation_counts,
        "assumption_2k_lt_n": config.assumption_2k_lt_n,
    }


def batch_run_entry_dict(config: RunConfig, entry: dict) -> dict:
    """Per-run summary written by the batch path (no trajectory kept)."""
    return {
        "config": config.to_json_dict(),
        "replica": entry["replica"],
        "outcome": {
            "kind": entry["kind"],
            "phi": entry["phi"],
            "evidence": entry["evidence"],
        },
        "assumption_2k_lt_n": config.assumption_2k_lt_n,
        "initial_points_unverified": config.initial_points is not None,
        "stop_reason": _STOP_REASONS[entry["stop_code"]],
        "t_reach_tol_f": entry["t_reach_tol_f"],
        "violations": entry["violations"],
    }


def write_violations_csv(rows: Iterable[dict], path: Path) -> None:
    lines = ["run_id,step,invariant,lhs,rhs"]
    for r in rows:
        lines.append(
            f"{r['run_id']},{r['step']},{r['invariant']},{_fmt(r['lhs'])},{_fmt(r['rhs'])}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _check_csv_invariants(data: dict, config: Optional[RunConfig], run_id: str) -> list[dict]:
    """Invariants derivable from the pinned CSV schema.

    With thinning, the monotone and one-step bounds remain valid between
    surviving rows because F is nonincreasing.
    """
    viol: list[dict] = []

    def add(step: int, name: str, lhs: float, rhs: float) -> None:
        viol.append({"run_id": run_id, "step": step, "invariant": name, "lhs": lhs, "rhs": rhs})

    t = data["t"]
    f = data["F"]
    d = data["D"]
    n_rows = len(t)
    for name, arr in (("F_finite", f), ("D_finite", d)):
        bad = ~np.isfinite(arr)
        for i in np.nonzero(bad)[0]:
            add(int(t[i]), name, float(arr[i]), math.nan)
    if not np.all(np.isfinite(data["mu"])):
        for i in np.nonzero(~np.isfinite(data["mu"]).all(axis=1))[0]:
            add(int(t[i]), "mu_finite", math.nan, math.nan)
    for i in np.nonzero(f < 0)[0]:
        add(int(t[i]), "F_nonnegative", float(f[i]), 0.0)
    for i in np.nonzero(d < 0)[0]:
        add(int(t[i]), "D_nonnegative", float(d[i]), 0.0)
    for i in np.nonzero(data["tie_count"] < 1)[0]:
        add(int(t[i]), "tie_count_positive", float(data["tie_count"][i]), 1.0)

    for i in np.nonzero(f[1:] > f[:-1] + 1e-9)[0]:
        add(int(t[i + 1]), "monotone", float(f[i + 1]), float(f[i]))

    if config is not None:
        m = config.N - config.K
        if m >= 2:
            root = np.sqrt(2.0 * f)
            lower = root / math.sqrt(m - 1)
            for i in np.nonzero(lower - d > _REL * lower + _ABS)[0]:
                add(int(t[i]), "sandwich_lower", float(d[i]), float(lower[i]))
            for i in np.nonzero(d - root > _REL * root + _ABS)[0]:
                add(int(t[i]), "sandwich_upper", float(d[i]), float(root[i]))
            if n_rows > 1:
                up = d[:-1] * math.sqrt(m - 1)
                for i in np.nonzero(d[1:] - root[:-1] > _REL * root[:-1] + _ABS)[0]:
                    add(int(t[i + 1]), "step_bound_upper", float(d[i + 1]), float(root[i]))
                for i in np.nonzero(root[:-1] - up > _REL * up + _ABS)[0]:
                    add(int(t[i]), "step_bound_lower", float(root[i]), float(up[i]))

    both = data["core_changed"] & data["rejected"]
    for i in np.nonzero(both)[0]:
        add(int(t[i]), "flags_exclusive", 1.0, 0.0)
    after_start = (t > 0) & ~data["core_changed"] & ~data["rejected"]
    for i in np.nonzero(after_start)[0]:
        add(int(t[i]), "flags_complement", 0.0, 1.0)
    return viol


def verify_tree(root: Path) -> tuple[list[dict], int]:
    """Check every artifact under ``root``; returns (violations, n_checked).

    Trajectory CSVs are checked row-wise against the derivable
    invariants; run and batch summaries must report zero recorded
    violations.
    """
    root = Path(root)
    violations: list[dict] = []
    checked = 0
    for csv_path in sorted(root.rglob("trajectory.csv")):
        checked += 1
        run_id = csv_path.parent.relative_to(root).as_posix() or "."
        data = read_trajectory_csv(csv_path)
        config = None
        summary_path = csv_path.parent / "summary.json"
        if summary_path.exists():
            summary = json.loads(summary_path.read_text(encoding="utf-8"))
            config = config_from_json(summary["config"])
        violations.extend(_check_csv_invariants(data, config, run_id))
    for summary_path in sorted(root.rglob("summary.json")):
        checked += 1
        run_id = summary_path.parent.relative_to(root).as_posix() or "."
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        counts = summary.get("violations") or summary.get("violation_counts") or {}
        for name, value in counts.items():
            if name.endswith("_triggers") or value is None:
                continue
            if value:
                violations.append(
                    {
                        "run_id": run_id,
                        "step": -1,
                        "invariant": f"summary_{name}",
                        "lhs": float(value),
                        "rhs": 0.0,
                    }
                )
    for batch_path in sorted(root.rglob("batch_summary.json")):
        checked += 1
        run_id = batch_path.parent.relative_to(root).as_posix() or "."
        summary = json.loads(batch_path.read_text(encoding="utf-8"))
        counts = summary.get("violation_counts", {})
        for name, value in counts.items():
            if name.endswith("_triggers") or value is None:
                continue
            if value:
                violations.append(
                    {
                        "run_id": run_id,
                        "step": -1,
                        "invariant": f"batch_{name}",
                        "lhs": float(value),
                        "rhs": 0.0,
                    }
                )
    return violations, checked

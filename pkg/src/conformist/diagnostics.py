"""Cross-run verification: invariant monitors, drift estimation, interval
crossings, and batch aggregation.

Checkers are pure functions over immutable trajectories. The monotone
check uses an absolute 1e-9 slack; the range-energy sandwich and the
one-step range bound use a 1e-9 relative band plus a tiny absolute floor
so exact zeros compare cleanly. The rejection monitor counts the steps
where its distance hypothesis actually held (triggers) and, among them,
the steps where the core changed anyway; it is never reported
vacuously.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .engine import RunConfig, Trajectory, crossing_count, run

_REL = 1e-9
_ABS = 1e-15


class _NotApplicable:
    """Marker for a checker whose regime precondition fails."""

    _instance: Optional["_NotApplicable"] = None

    def __new__(cls) -> "_NotApplicable":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NOT_APPLICABLE"

    def __bool__(self) -> bool:
        return False


NOT_APPLICABLE = _NotApplicable()


def check_monotone(traj: Trajectory) -> list[int]:
    """Indices t with F(t+1) > F(t) + 1e-9; empty for a conforming run."""
    f = traj.F
    bad = np.nonzero(f[1:] > f[:-1] + 1e-9)[0]
    return bad.tolist()


def check_sandwich(traj: Trajectory) -> list[int]:
    """Step indices violating the range-energy sandwich or the one-step
    range bound beyond 1e-9 relative.

    Per step: sqrt(2F/(N-K-1)) <= D <= sqrt(2F). Between steps:
    D(t+1) <= sqrt(2F(t)) <= D(t) * sqrt(N-K-1).
    """
    m = traj.config.N - traj.config.K
    if m < 2:
        return []
    f = traj.F
    d = traj.D
    root = np.sqrt(2.0 * f)
    lower = root / math.sqrt(m - 1)
    bad = set()
    viol_low = np.nonzero(lower - d > _REL * lower + _ABS)[0]
    viol_high = np.nonzero(d - root > _REL * root + _ABS)[0]
    bad.update(viol_low.tolist())
    bad.update(viol_high.tolist())
    if len(f) > 1:
        up = d[:-1] * math.sqrt(m - 1)
        viol_step1 = np.nonzero(d[1:] - root[:-1] > _REL * root[:-1] + _ABS)[0]
        viol_step2 = np.nonzero(root[:-1] - up > _REL * up + _ABS)[0]
        bad.update(viol_step1.tolist())
        bad.update(viol_step2.tolist())
    return sorted(bad)


def check_rejection(traj: Trajectory):
    """(triggers, violations) for the distant-sample rejection law.

    A step t >= 1 is a trigger when every fresh sample was strictly
    farther than D(t-1) * sqrt(N-K-1) from every point of the previous
    core; on a trigger the kept set must equal the previous core, so a
    changed core counts as a violation. Requires 2K < N, else
    NOT_APPLICABLE.
    """
    cfg = traj.config
    if not cfg.assumption_2k_lt_n:
        return NOT_APPLICABLE
    if len(traj) < 2:
        return (0, 0)
    factor = math.sqrt(cfg.N - cfg.K - 1)
    thresh = traj.D[:-1] * factor
    trig = traj.min_sample_dist[1:] > thresh
    violations = trig & traj.core_changed[1:]
    return (int(trig.sum()), int(violations.sum()))


@dataclass(frozen=True)
class DriftReport:
    """Mean one-step increment of the drift statistic sqrt(F) + c*(mu' +
    max(0, -R_plus)), estimated over all recorded steps (no stopping-time
    gating; the estimate is a finite-sample surrogate, labeled as such)."""

    c: float
    r_plus: float
    n_transitions: int
    mean_delta_h: float
    stderr: float
    window: tuple[int, int]


def supermartingale_drift(traj: Trajectory, c: float, r_plus: float):
    """DriftReport for d=1, K=1 trajectories; NOT_APPLICABLE otherwise."""
    cfg = traj.config
    if cfg.dim != 1 or cfg.K != 1:
        return NOT_APPLICABLE
    if len(traj) < 2:
        return NOT_APPLICABLE
    h = np.sqrt(traj.F) + c * (traj.mu[:, 0] + max(0.0, -r_plus))
    delta = np.diff(h)
    n = delta.shape[0]
    mean = float(delta.mean())
    stderr = float(delta.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return DriftReport(
        c=c,
        r_plus=r_plus,
        n_transitions=n,
        mean_delta_h=mean,
        stderr=stderr,
        window=(0, len(traj) - 1),
    )


def count_crossings(traj: Trajectory, a: float, b: float) -> int:
    """Completed traversals of (a, b) by the core barycenter, with
    hysteresis (must fully exit the interval on each side)."""
    if traj.config.dim != 1:
        raise ValueError("crossing counts are defined for d=1 trajectories")
    if not a < b:
        raise ValueError(f"need a < b, got ({a}, {b})")
    return crossing_count(traj.mu[:, 0], a, b)


@dataclass(frozen=True)
class BatchSummary:
    """Aggregates over a batch of independent runs of one config.

    ``violation_counts`` holds totals across runs; rejection entries are
    None when 2K >= N makes the monitor inapplicable. ``runs`` carries
    one plain dict per run, in replica order.
    """

    n_runs: int
    outcome_counts: dict
    f_quantiles_at_checkpoints: tuple[dict, ...]
    mean_time_to_tol_f: Optional[float]
    reached_tol_f: int
    violation_counts: dict
    replicas: tuple[int, ...]
    runs: tuple[dict, ...]


def _checkpoints(max_steps: int) -> list[int]:
    cps = {max_steps}
    p = 1
    while p <= max_steps:
        cps.add(p)
        p *= 10
    return sorted(cps)


def _run_stats(config: RunConfig, replica: int, cps: Sequence[int]) -> dict:
    traj = run(config, replica=replica)
    f = traj.F
    last = len(traj) - 1
    reach = np.nonzero(f < config.tol_F)[0]
    rej = check_rejection(traj)
    out = traj.outcome
    return {
        "replica": replica,
        "kind": out.kind,
        "phi": None if out.phi is None else [float(v) for v in out.phi],
        "evidence": {k: (float(v) if isinstance(v, float) else int(v)) for k, v in out.evidence.items()},
        "stop_code": traj.stop_code,
        "f_at_checkpoints": [float(f[min(cp, last)]) for cp in cps],
        "t_reach_tol_f": int(reach[0]) if reach.size else None,
        "violations": {
            "monotone": len(check_monotone(traj)),
            "sandwich": len(check_sandwich(traj)),
            "rejection_triggers": None if rej is NOT_APPLICABLE else rej[0],
            "rejection_violations": None if rej is NOT_APPLICABLE else rej[1],
        },
    }


def batch_run(
    config: RunConfig,
    n_runs: int,
    seeds: Optional[Sequence[int]] = None,
    jobs: int = 1,
) -> BatchSummary:
    """Run ``n_runs`` independent replicas and aggregate.

    ``seeds`` lists the replica indices (default 0..n_runs-1); replica i
    draws from the stream mixed from (config.seed, i). Runs may fan out
    across processes; aggregation merges in replica order, so the result
    does not depend on scheduling.
    """
    if n_runs < 1:
        raise ValueError("need n_runs >= 1")
    replicas = list(range(n_runs)) if seeds is None else [int(s) for s in seeds]
    if len(replicas) != n_runs:
        raise ValueError(f"got {len(replicas)} seeds for {n_runs} runs")
    cps = _checkpoints(config.max_steps)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            stats = list(pool.map(_run_stats, [config] * n_runs, replicas, [cps] * n_runs))
    else:
        stats = [_run_stats(config, rep, cps) for rep in replicas]

    from .engine import OUTCOME_KINDS

    outcome_counts = {kind: 0 for kind in OUTCOME_KINDS}
    for st in stats:
        outcome_counts[st["kind"]] += 1

    f_table = []
    for ci, cp in enumerate(cps):
        vals = np.array([st["f_at_checkpoints"][ci] for st in stats])
        f_table.append(
            {
                "t": cp,
                "min": float(vals.min()),
                "q25": float(np.quantile(vals, 0.25)),
                "median": float(np.quantile(vals, 0.5)),
                "q75": float(np.quantile(vals, 0.75)),
                "max": float(vals.max()),
            }
        )

    times = [st["t_reach_tol_f"] for st in stats if st["t_reach_tol_f"] is not None]
    na_rejection = stats[0]["violations"]["rejection_triggers"] is None
    violation_counts = {
        "monotone": sum(st["violations"]["monotone"] for st in stats),
        "sandwich": sum(st["violations"]["sandwich"] for st in stats),
        "rejection_triggers": (
            None if na_rejection else sum(st["violations"]["rejection_triggers"] for st in stats)
        ),
        "rejection_violations": (
            None if na_rejection else sum(st["violations"]["rejection_violations"] for st in stats)
        ),
    }
    return BatchSummary(
        n_runs=n_runs,
        outcome_counts=outcome_counts,
        f_quantiles_at_checkpoints=tuple(f_table),
        mean_time_to_tol_f=(sum(times) / len(times)) if times else None,
        reached_tol_f=len(times),
        violation_counts=violation_counts,
        replicas=tuple(replicas),
        runs=tuple(stats),
    )

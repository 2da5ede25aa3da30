"""Process driver: initialize, iterate select-and-resample steps, record a
trajectory, stop on convergence, divergence, or budget, classify the end.

One run is strictly sequential because the RNG consumption order is part
of the semantics: the replica stream first yields the N initial draws
(unless explicit points are given), then the tie draws of the selection
at t=0, then per step the K fresh sample draws followed by that step's
tie draws. Distinct runs use independent streams derived from
(seed, replica) and may execute in parallel.

Record t of a trajectory describes the core selected from the
configuration at time t: record 0 is the selection on the initial
points, before any resampling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import _kernel
from .distributions import DistributionSpec, Sampler, two_atom_values
from .errors import BadInitial, InvalidK
from .geometry import PointConfiguration, barycenter, energy, point_range
from .selection import CoreSelection, enumerate_removals, select_core

CONVERGED_TO_POINT = "ConvergedToPoint"
DIVERGED = "Diverged"
OSCILLATING_CORE = "OscillatingCore"
UNDECIDED = "Undecided"
OUTCOME_KINDS = (CONVERGED_TO_POINT, DIVERGED, OSCILLATING_CORE, UNDECIDED)


def stream_for(seed: int, replica: int = 0) -> np.random.Generator:
    """Independent PCG64 stream for one replica.

    The mixing function is fixed: the (seed, replica) integer pair seeds
    a ``numpy.random.SeedSequence``. Same pair, same byte stream.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, replica))))


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on; hashable apart from the dist params.

    ``tol_F`` with the windowed barycenter-displacement test defines
    convergence; a run only converges once at least ``move_window`` steps
    of history exist and all of them sit within ``tol_move`` of the
    current core barycenter (F alone cannot pin a limit point, since the
    core could still drift). Divergence uses ``diverge_radius`` as a
    finite proxy for escape to infinity. 2K < N is reported in output,
    never enforced: the two-atom oscillation regime with 2K = N must stay
    runnable.
    """

    N: int
    K: int
    dim: int
    dist: DistributionSpec
    seed: int
    max_steps: int
    tol_F: float = 1e-12
    move_window: int = 1000
    tol_move: float = 1e-9
    diverge_radius: float = 1e6
    initial_points: Optional[tuple[tuple[float, ...], ...]] = None
    osc_interval: Optional[tuple[float, float]] = None
    osc_min_crossings: int = 50

    def __post_init__(self) -> None:
        if self.N < 3:
            raise InvalidK(f"need N >= 3, got N={self.N}")
        if not 1 <= self.K <= self.N - 2:
            raise InvalidK(f"need 1 <= K <= N-2, got K={self.K}, N={self.N}")
        if self.dim != self.dist.dim:
            raise BadInitial(f"config dim {self.dim} != distribution dim {self.dist.dim}")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.tol_F <= 0 or self.tol_move <= 0 or self.diverge_radius <= 0:
            raise ValueError("tolerances and diverge_radius must be > 0")
        if self.move_window < 0:
            raise ValueError("move_window must be >= 0")
        if self.osc_min_crossings < 1:
            raise ValueError("osc_min_crossings must be >= 1")
        if self.osc_interval is not None:
            a, b = self.osc_interval
            if not a < b:
                raise ValueError(f"osc_interval needs a < b, got {self.osc_interval}")
            object.__setattr__(self, "osc_interval", (float(a), float(b)))
        if self.initial_points is not None:
            pts = tuple(tuple(float(c) for c in row) for row in self.initial_points)
            if len(pts) != self.N:
                raise BadInitial(f"expected {self.N} initial points, got {len(pts)}")
            if any(len(row) != self.dim for row in pts):
                raise BadInitial("initial points must have dim coordinates each")
            object.__setattr__(self, "initial_points", pts)

    @property
    def assumption_2k_lt_n(self) -> bool:
        return 2 * self.K < self.N

    def to_json_dict(self) -> dict:
        return {
            "N": self.N,
            "K": self.K,
            "dim": self.dim,
            "dist": self.dist.to_json_dict(),
            "seed": self.seed,
            "max_steps": self.max_steps,
            "tol_F": self.tol_F,
            "move_window": self.move_window,
            "tol_move": self.tol_move,
            "diverge_radius": self.diverge_radius,
            "initial_points": (
                None
                if self.initial_points is None
                else [list(row) for row in self.initial_points]
            ),
            "osc_interval": None if self.osc_interval is None else list(self.osc_interval),
            "osc_min_crossings": self.osc_min_crossings,
        }


def config_from_json(obj: dict) -> RunConfig:
    """Build a RunConfig from its JSON form (inverse of to_json_dict)."""
    from .distributions import spec_from_json

    required = ("N", "K", "dim", "dist", "seed", "max_steps")
    missing = [k for k in required if k not in obj]
    if missing:
        raise BadInitial(f"config missing required fields: {missing}")
    kwargs = dict(
        N=obj["N"],
        K=obj["K"],
        dim=obj["dim"],
        dist=spec_from_json(obj["dist"]) if not isinstance(obj["dist"], DistributionSpec) else obj["dist"],
        seed=obj["seed"],
        max_steps=obj["max_steps"],
    )
    for key in ("tol_F", "move_window", "tol_move", "diverge_radius", "osc_min_crossings"):
        if obj.get(key) is not None:
            kwargs[key] = obj[key]
    if obj.get("initial_points") is not None:
        kwargs["initial_points"] = tuple(tuple(row) for row in obj["initial_points"])
    if obj.get("osc_interval") is not None:
        kwargs["osc_interval"] = tuple(obj["osc_interval"])
    return RunConfig(**kwargs)


@dataclass(frozen=True)
class StepRecord:
    """Core statistics after the selection at one step."""

    t: int
    F: float
    D: float
    mu_core: np.ndarray
    core_changed: bool
    all_samples_rejected: bool
    min_sample_core_dist: float
    tie_count: int


@dataclass(frozen=True)
class Outcome:
    """Finite-horizon classification of a finished run."""

    kind: str
    phi: Optional[np.ndarray]
    evidence: dict

    def __post_init__(self) -> None:
        if self.kind not in OUTCOME_KINDS:
            raise ValueError(f"unknown outcome kind {self.kind!r}")
        if (self.kind == CONVERGED_TO_POINT) != (self.phi is not None):
            raise ValueError("phi must be present exactly for ConvergedToPoint")


class Trajectory:
    """Columnar per-step records of one run, immutable once produced."""

    def __init__(
        self,
        config: RunConfig,
        F: np.ndarray,
        D: np.ndarray,
        mu: np.ndarray,
        core_changed: np.ndarray,
        rejected: np.ndarray,
        min_sample_dist: np.ndarray,
        tie_count: np.ndarray,
        final_core: np.ndarray,
        stop_code: int,
        outcome: Outcome,
        initial_points_unverified: bool,
    ):
        self.config = config
        self.F = F
        self.D = D
        self.mu = mu
        self.core_changed = core_changed
        self.rejected = rejected
        self.min_sample_dist = min_sample_dist
        self.tie_count = tie_count
        self.final_core = final_core
        self.stop_code = stop_code
        self.outcome = outcome
        self.initial_points_unverified = initial_points_unverified
        for arr in (F, D, mu, core_changed, rejected, min_sample_dist, tie_count, final_core):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return self.F.shape[0]

    def record(self, t: int) -> StepRecord:
        return StepRecord(
            t=t,
            F=float(self.F[t]),
            D=float(self.D[t]),
            mu_core=self.mu[t],
            core_changed=bool(self.core_changed[t]),
            all_samples_rejected=bool(self.rejected[t]),
            min_sample_core_dist=float(self.min_sample_dist[t]),
            tie_count=int(self.tie_count[t]),
        )

    def records(self) -> Iterator[StepRecord]:
        for t in range(len(self)):
            yield self.record(t)


def init_state(config: RunConfig, rng: np.random.Generator) -> PointConfiguration:
    """Initial N points: explicit ones verbatim, else N i.i.d. draws.

    Explicit points are not checked against the support of the
    replacement law (not computable in general); the produced trajectory
    carries an ``initial_points_unverified`` flag instead.
    """
    if config.initial_points is not None:
        return PointConfiguration(np.array(config.initial_points, dtype=float))
    sampler = Sampler(config.dist)
    return PointConfiguration(sampler.sample_n(rng, config.N))


def step(
    state: PointConfiguration,
    config: RunConfig,
    rng: np.random.Generator,
    current_core: Optional[tuple[int, ...]] = None,
    t: int = -1,
) -> tuple[PointConfiguration, StepRecord]:
    """One transition: keep the core of ``state``, add K fresh draws,
    select the new core, and report its statistics.

    If ``current_core`` (kept indices of ``state``) is given, the
    previous selection is reused and the call consumes exactly the K
    sample draws plus the new selection's tie draws, matching the run
    loop; otherwise the core of ``state`` is recomputed first, consuming
    that selection's tie draws as well. The returned configuration lists
    the kept points first (kept order), then the fresh samples.
    """
    if state.n != config.N:
        raise BadInitial(f"state has {state.n} points, config expects {config.N}")
    if current_core is None:
        current_core = select_core(state, config.K, rng).kept
    sampler = Sampler(config.dist)
    fresh = sampler.sample_n(rng, config.K)
    old_core = state.points[list(current_core)]
    pool = np.vstack([old_core, fresh])
    new_cfg = PointConfiguration(pool)
    sel: CoreSelection = select_core(new_cfg, config.K, rng)

    m = config.N - config.K
    fresh_rows = tuple(range(m, config.N))
    rejected = sel.removed == fresh_rows
    diff = fresh[:, None, :] - old_core[None, :, :]
    min_dist = float(np.sqrt((diff * diff).sum(axis=2).min()))
    kept_cfg = new_cfg.subset(sel.kept)
    record = StepRecord(
        t=t,
        F=sel.core_energy,
        D=point_range(kept_cfg),
        mu_core=barycenter(kept_cfg),
        core_changed=not rejected,
        all_samples_rejected=rejected,
        min_sample_core_dist=min_dist,
        tie_count=sel.tie_count,
    )
    return new_cfg, record


def run(config: RunConfig, replica: int = 0) -> Trajectory:
    """Drive the process from t=0 until convergence, divergence, or the
    step budget; returns the recorded trajectory with its outcome."""
    gen = stream_for(config.seed, replica)
    state = init_state(config, gen)
    sampler = Sampler(config.dist)
    comp_cum, fam_tab, par_tab = sampler.tables

    n, k, d = config.N, config.K, config.dim
    combos = np.array(list(enumerate_removals(n, k)), dtype=np.int64)
    kept_tab = np.array(
        [[i for i in range(n) if i not in set(row)] for row in combos], dtype=np.int64
    )
    cap = config.max_steps + 1
    rec_f = np.empty(cap)
    rec_d = np.empty(cap)
    rec_mu = np.empty((cap, d))
    rec_changed = np.zeros(cap, dtype=np.uint8)
    rec_rejected = np.zeros(cap, dtype=np.uint8)
    rec_mindist = np.empty(cap)
    rec_ties = np.empty(cap, dtype=np.int64)

    pool = state.points.copy()
    t_stop, stop_code, chosen = _kernel.run_process(
        gen,
        pool,
        combos,
        kept_tab,
        comp_cum,
        fam_tab,
        par_tab,
        config.max_steps,
        config.tol_F,
        config.move_window,
        config.tol_move,
        config.diverge_radius,
        rec_f,
        rec_d,
        rec_mu,
        rec_changed,
        rec_rejected,
        rec_mindist,
        rec_ties,
    )
    end = t_stop + 1
    final_core = pool[kept_tab[chosen]].copy()
    traj = Trajectory(
        config=config,
        F=rec_f[:end].copy(),
        D=rec_d[:end].copy(),
        mu=rec_mu[:end].copy(),
        core_changed=rec_changed[:end].astype(bool),
        rejected=rec_rejected[:end].astype(bool),
        min_sample_dist=rec_mindist[:end].copy(),
        tie_count=rec_ties[:end].copy(),
        final_core=final_core,
        stop_code=stop_code,
        outcome=Outcome(UNDECIDED, None, {}),  # replaced below
        initial_points_unverified=config.initial_points is not None,
    )
    traj.outcome = classify(traj)
    return traj


def oscillation_interval(traj: Trajectory) -> tuple[float, float]:
    """Interval whose completed crossings by the core barycenter count as
    oscillation: the configured one, the quarter points between the two
    atoms of a two-atom law, else the recorded first-coordinate quartiles."""
    cfg = traj.config
    if cfg.osc_interval is not None:
        return cfg.osc_interval
    atoms = two_atom_values(cfg.dist)
    if atoms is not None:
        lo, hi = atoms
        span = hi - lo
        return (lo + 0.25 * span, lo + 0.75 * span)
    series = traj.mu[:, 0]
    a = float(np.quantile(series, 0.25))
    b = float(np.quantile(series, 0.75))
    return (a, b)


def crossing_count(series: np.ndarray, a: float, b: float) -> int:
    """Completed traversals of (a, b) with hysteresis: the series must
    fully exit the interval on each side for a crossing to count."""
    if a >= b:
        return 0
    side = np.where(series <= a, -1, np.where(series >= b, 1, 0))
    side = side[side != 0]
    if side.size < 2:
        return 0
    return int((side[1:] != side[:-1]).sum())


def classify(traj: Trajectory, thresholds: Optional[dict] = None) -> Outcome:
    """Deterministic outcome from recorded statistics.

    ``thresholds`` may override any of tol_F, move_window, tol_move,
    diverge_radius, osc_interval, osc_min_crossings; defaults come from
    the trajectory's config. The rules mirror the run loop: converged if
    the final F is below tol_F with a full quiet barycenter window;
    diverged if |mu'| - D exceeds the radius at the end; otherwise
    oscillating when the interval-crossing count reaches the threshold,
    else undecided.
    """
    cfg = traj.config
    th = {
        "tol_F": cfg.tol_F,
        "move_window": cfg.move_window,
        "tol_move": cfg.tol_move,
        "diverge_radius": cfg.diverge_radius,
        "osc_interval": cfg.osc_interval,
        "osc_min_crossings": cfg.osc_min_crossings,
    }
    if thresholds:
        th.update(thresholds)
    end = len(traj) - 1
    mu_end = traj.mu[end]
    a, b = (
        th["osc_interval"]
        if th["osc_interval"] is not None
        else oscillation_interval(traj)
    )
    crossings = crossing_count(traj.mu[:, 0], a, b)
    evidence = {
        "final_F": float(traj.F[end]),
        "final_D": float(traj.D[end]),
        "final_origin_distance": float(np.linalg.norm(mu_end)),
        "core_changes": int(traj.core_changed.sum()),
        "crossings": crossings,
        "steps": end,
    }

    converged = False
    if traj.F[end] < th["tol_F"] and end >= th["move_window"]:
        w = th["move_window"]
        window = traj.mu[end - w : end]
        disp = np.sqrt(((window - mu_end) ** 2).sum(axis=1))
        converged = bool((disp < th["tol_move"]).all())
    if converged:
        return Outcome(CONVERGED_TO_POINT, mu_end.copy(), evidence)
    if float(np.linalg.norm(mu_end)) - float(traj.D[end]) > th["diverge_radius"]:
        return Outcome(DIVERGED, None, evidence)
    if crossings >= th["osc_min_crossings"]:
        return Outcome(OSCILLATING_CORE, None, evidence)
    return Outcome(UNDECIDED, None, evidence)

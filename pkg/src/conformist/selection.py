"""Exact core selection: the (N-K)-subset minimizing the spread energy.

Every C(N, K) removal is enumerated in lexicographic order with
incremental moment subtraction. Ties on the running minimum are broken
uniformly by single-pass reservoir sampling, consuming one uniform per
encountered tie, so the enumeration stays one pass and the RNG
consumption is a fixed function of the candidate energies. For K=1 the
minimizer is the point furthest from the barycenter, exposed separately
as a fast path and cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

from .errors import InconsistentMoments, InvalidK
from .geometry import PointConfiguration, barycenter, energy


@dataclass(frozen=True)
class CoreSelection:
    """Result of one core selection.

    ``kept`` and ``removed`` partition {0, ..., N-1}; ``core_energy`` is
    the energy of the kept subset, recomputed from scratch after the
    winner is known; ``tie_count`` is the number of exactly-minimal
    candidates.
    """

    kept: tuple[int, ...]
    removed: tuple[int, ...]
    core_energy: float
    tie_count: int


def enumerate_removals(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """All K-subsets of {0, ..., n-1} in lexicographic order.

    The order is part of the reproducibility contract: tie-break draws
    happen in this order.
    """
    if not 1 <= k <= n:
        raise InvalidK(f"need 1 <= K <= N, got K={k}, N={n}")
    return combinations(range(n), k)


def moments_energy(sum_vec: Sequence[float], sum_sq: float, m: int) -> float:
    """Energy of m points from their moment pair: sum_sq - |sum_vec|^2 / m.

    Values within -1e-9 of zero are clamped to 0; anything lower violates
    the Cauchy-Schwarz precondition and raises.
    """
    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    vec = np.asarray(sum_vec, dtype=np.float64)
    val = float(sum_sq - vec.dot(vec) / m)
    if val < -1e-9:
        raise InconsistentMoments(
            f"sum_sq={sum_sq!r} below |sum_vec|^2/m by {-val!r}"
        )
    return max(val, 0.0)


def select_core(
    cfg: PointConfiguration,
    k: int,
    rng: np.random.Generator,
    rel_tie_tol: float = 0.0,
) -> CoreSelection:
    """Pick the (N-K)-subset of ``cfg`` with minimal energy.

    Candidate energies come from one canonical code path (moment
    subtraction from the cached global moments); candidates tying the
    running minimum are resolved uniformly via ``rng``. ``rel_tie_tol``
    widens tie detection to a relative band for experimentation; the
    default 0 means exact float equality, so atomic inputs tie exactly
    and continuous inputs almost surely never do. The winner's energy is
    recomputed from scratch over the kept points.
    """
    n = cfg.n
    if not 1 <= k <= n - 2:
        raise InvalidK(f"need 1 <= K <= N-2, got K={k}, N={n}")
    m = n - k
    pts = cfg.points
    tot_sum = cfg.moment_sum
    tot_sq = cfg.moment_sq

    best = np.inf
    best_removed: tuple[int, ...] = ()
    ties = 1
    for removed in enumerate_removals(n, k):
        idx = list(removed)
        rem = pts[idx]
        kept_sum = tot_sum - rem.sum(axis=0)
        kept_sq = tot_sq - float((rem * rem).sum())
        g = kept_sq - float(kept_sum.dot(kept_sum)) / m
        if _ties_running_best(g, best, rel_tie_tol):
            ties += 1
            if rng.random() < 1.0 / ties:
                best_removed = removed
        elif g < best:
            best = g
            best_removed = removed
            ties = 1

    kept = tuple(i for i in range(n) if i not in best_removed)
    return CoreSelection(
        kept=kept,
        removed=best_removed,
        core_energy=energy(cfg.subset(kept)),
        tie_count=ties,
    )


def furthest_point_core(
    cfg: PointConfiguration, rng: np.random.Generator
) -> CoreSelection:
    """K=1 fast path: drop one point furthest from the barycenter.

    Equivalent to ``select_core(cfg, 1, rng)``; exact distance ties are
    broken uniformly via the same reservoir rule.
    """
    n = cfg.n
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    mu = barycenter(cfg)
    centered = cfg.points - mu
    dist_sq = (centered * centered).sum(axis=1)

    worst = -np.inf
    chosen = 0
    ties = 1
    for i in range(n):
        d = float(dist_sq[i])
        if d == worst:
            ties += 1
            if rng.random() < 1.0 / ties:
                chosen = i
        elif d > worst:
            worst = d
            chosen = i
            ties = 1

    kept = tuple(i for i in range(n) if i != chosen)
    return CoreSelection(
        kept=kept,
        removed=(chosen,),
        core_energy=energy(cfg.subset(kept)),
        tie_count=ties,
    )


def _ties_running_best(g: float, best: float, rel_tol: float) -> bool:
    if not np.isfinite(best):
        return False
    if rel_tol == 0.0:
        return g == best
    return abs(g - best) <= rel_tol * max(abs(g), abs(best))

"""Point-set primitives: barycenter, spread energy, range, cached moments.

A configuration is an ordered list of n points in R^d. The energy of a
configuration is the sum of squared distances of the points to their
barycenter; it equals the mean over unordered pairs of squared pairwise
distances, and also the moment form sum(|x|^2) - |sum(x)|^2 / n. The
barycenter form is canonical here; the pairwise form is kept as an
independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyConfiguration


@dataclass(frozen=True, eq=False)
class PointConfiguration:
    """Immutable ordered set of n points in R^d with cached moments.

    ``points`` accepts an (n, d) array, a sequence of length-d rows, or a
    flat sequence of scalars (interpreted as d=1). Coordinates must be
    finite 64-bit floats. ``moment_sum`` is sum(x_i) and ``moment_sq`` is
    sum(|x_i|^2), both computed at construction.
    """

    points: np.ndarray
    moment_sum: np.ndarray = field(init=False, repr=False)
    moment_sq: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[0] == 0:
            raise EmptyConfiguration("configuration needs at least one point")
        if pts.shape[1] == 0:
            raise ValueError("points need at least one coordinate")
        if not np.all(np.isfinite(pts)):
            raise ValueError("coordinates must be finite")
        pts = np.ascontiguousarray(pts)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "moment_sum", pts.sum(axis=0))
        self.moment_sum.flags.writeable = False
        object.__setattr__(self, "moment_sq", float((pts * pts).sum()))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, indices: Sequence[int]) -> "PointConfiguration":
        """New configuration from the rows ``indices``, in the given order."""
        return PointConfiguration(self.points[list(indices)])


def barycenter(cfg: PointConfiguration) -> np.ndarray:
    """Arithmetic mean of the points, as a length-d array."""
    return cfg.moment_sum / cfg.n


def energy(cfg: PointConfiguration) -> float:
    """Sum of squared distances to the barycenter (canonical form)."""
    centered = cfg.points - barycenter(cfg)
    return float((centered * centered).sum())


def energy_pairwise(cfg: PointConfiguration) -> float:
    """Energy via the pairwise form: (1/n) * sum over i<j of |x_i - x_j|^2.

    O(n^2 d); exists as an independent oracle for :func:`energy`.
    """
    pts = cfg.points
    diff = pts[:, None, :] - pts[None, :, :]
    sq = (diff * diff).sum(axis=2)
    # full matrix counts each unordered pair twice
    return float(sq.sum() / (2.0 * cfg.n))


def point_range(cfg: PointConfiguration) -> float:
    """Maximum pairwise Euclidean distance (0 for a single point)."""
    pts = cfg.points
    if cfg.n == 1:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    sq = (diff * diff).sum(axis=2)
    return float(np.sqrt(sq.max()))

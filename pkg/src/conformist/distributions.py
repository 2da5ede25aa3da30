"""Declarative replacement-law specs, samplers, and empirical checkers.

A ``DistributionSpec`` names a family and parameters and compiles to flat
tables consumed by the jitted sampling kernel, so library draws and
engine draws share one code path and one byte stream. Multidimensional
simple families have i.i.d. coordinates; anything else is expressed as a
product of one-dimensional factors, optionally mixed. The two checkers
estimate, by Monte Carlo counting, the conditional-ball-mass lower bound
(set regularity) and the consecutive-tail-interval mass ratio; both are
frequentist diagnostics, not proofs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from . import _kernel
from .errors import InsufficientMass, InsufficientTailMass, InvalidDistribution

_FAMILIES = {
    "UniformCube": _kernel.FAM_UNIFORM,
    "Gaussian": _kernel.FAM_GAUSSIAN,
    "Bernoulli": _kernel.FAM_BERNOULLI,
    "Cauchy": _kernel.FAM_CAUCHY,
    "Laplace": _kernel.FAM_LAPLACE,
    "Exponential": _kernel.FAM_EXPONENTIAL,
    "Pareto": _kernel.FAM_PARETO,
    "CantorLike": _kernel.FAM_CANTOR,
    "FiniteDiscrete": _kernel.FAM_FINITE,
    "Mixture": None,
    "ProductOfOneDim": None,
}

_WEIGHT_TOL = 1e-12
_MAX_CANTOR_DEPTH = 52  # ternary bits taken from one 53-bit uniform draw


@dataclass(frozen=True)
class DistributionSpec:
    """Family name, dimension, and family-specific parameters.

    Parameters are normalized (defaults filled in) at construction;
    invalid combinations raise :class:`InvalidDistribution`. The JSON
    encoding is ``{"family": str, "dim": int, "params": object}`` with
    mixture and product components nested in the same form.
    """

    family: str
    dim: int
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise InvalidDistribution(f"unknown family {self.family!r}")
        if not isinstance(self.dim, int) or self.dim < 1:
            raise InvalidDistribution(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "params", _normalize_params(self.family, self.dim, self.params))

    def to_json_dict(self) -> dict:
        params: dict[str, Any] = {}
        for key, val in self.params.items():
            if key == "components":
                params[key] = [c.to_json_dict() for c in val]
            elif isinstance(val, tuple):
                params[key] = list(val)
            else:
                params[key] = val
        return {"family": self.family, "dim": self.dim, "params": params}


def spec_from_json(obj: dict) -> DistributionSpec:
    """Inverse of :meth:`DistributionSpec.to_json_dict`."""
    if not isinstance(obj, dict):
        raise InvalidDistribution(f"distribution spec must be an object, got {type(obj).__name__}")
    for key in ("family", "dim"):
        if key not in obj:
            raise InvalidDistribution(f"distribution spec missing {key!r}")
    params = dict(obj.get("params", {}))
    if "components" in params:
        params["components"] = [spec_from_json(c) for c in params["components"]]
    return DistributionSpec(obj["family"], obj["dim"], params)


def _positive(params: dict, key: str) -> None:
    val = params[key]
    if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
        raise InvalidDistribution(f"{key} must be finite and > 0, got {val!r}")


def _finite(params: dict, key: str) -> None:
    val = params[key]
    if not (isinstance(val, (int, float)) and math.isfinite(val)):
        raise InvalidDistribution(f"{key} must be finite, got {val!r}")


def _check_weights(weights: Sequence[float], count: int) -> tuple[float, ...]:
    if len(weights) != count:
        raise InvalidDistribution(f"expected {count} weights, got {len(weights)}")
    ws = tuple(float(w) for w in weights)
    if any(not math.isfinite(w) or w < 0 for w in ws):
        raise InvalidDistribution("weights must be finite and >= 0")
    if abs(sum(ws) - 1.0) > _WEIGHT_TOL:
        raise InvalidDistribution(f"weights must sum to 1 within {_WEIGHT_TOL}, got {sum(ws)!r}")
    return ws


def _normalize_params(family: str, dim: int, params: dict) -> dict:
    p = dict(params)

    def take(defaults: dict) -> dict:
        unknown = set(p) - set(defaults)
        if unknown:
            raise InvalidDistribution(f"unknown {family} parameters: {sorted(unknown)}")
        out = dict(defaults)
        out.update(p)
        missing = [k for k, v in out.items() if v is None]
        if missing:
            raise InvalidDistribution(f"{family} requires parameters: {missing}")
        return out

    if family == "UniformCube":
        out = take({"low": 0.0, "high": 1.0})
        _finite(out, "low")
        _finite(out, "high")
        if not out["low"] < out["high"]:
            raise InvalidDistribution("UniformCube needs low < high")
        return out
    if family == "Gaussian":
        out = take({"mean": 0.0, "sd": 1.0})
        _finite(out, "mean")
        _positive(out, "sd")
        return out
    if family == "Bernoulli":
        out = take({"p": None})
        _finite(out, "p")
        if not 0.0 < out["p"] < 1.0:
            raise InvalidDistribution(f"Bernoulli needs 0 < p < 1, got {out['p']!r}")
        return out
    if family in ("Cauchy", "Laplace"):
        out = take({"loc": 0.0, "scale": 1.0})
        _finite(out, "loc")
        _positive(out, "scale")
        return out
    if family == "Exponential":
        out = take({"rate": 1.0})
        _positive(out, "rate")
        return out
    if family == "Pareto":
        out = take({"alpha": None, "scale": 1.0})
        _positive(out, "alpha")
        _positive(out, "scale")
        return out
    if family == "CantorLike":
        out = take({"depth": 30})
        depth = out["depth"]
        if not isinstance(depth, int) or not 1 <= depth <= _MAX_CANTOR_DEPTH:
            raise InvalidDistribution(
                f"CantorLike depth must be an integer in [1, {_MAX_CANTOR_DEPTH}], got {depth!r}"
            )
        return out
    if family == "FiniteDiscrete":
        out = take({"values": None, "weights": None})
        values = tuple(float(v) for v in out["values"])
        if len(values) < 1:
            raise InvalidDistribution("FiniteDiscrete needs at least one atom")
        if any(not math.isfinite(v) for v in values):
            raise InvalidDistribution("FiniteDiscrete values must be finite")
        out["values"] = values
        out["weights"] = _check_weights(out["weights"], len(values))
        return out
    if family == "Mixture":
        out = take({"weights": None, "components": None})
        comps = [
            c if isinstance(c, DistributionSpec) else spec_from_json(c)
            for c in out["components"]
        ]
        if not comps:
            raise InvalidDistribution("Mixture needs at least one component")
        for c in comps:
            if c.dim != dim:
                raise InvalidDistribution(
                    f"mixture component dim {c.dim} does not match mixture dim {dim}"
                )
        out["components"] = tuple(comps)
        out["weights"] = _check_weights(out["weights"], len(comps))
        return out
    if family == "ProductOfOneDim":
        out = take({"components": None})
        comps = [
            c if isinstance(c, DistributionSpec) else spec_from_json(c)
            for c in out["components"]
        ]
        if len(comps) != dim:
            raise InvalidDistribution(
                f"ProductOfOneDim needs exactly dim={dim} components, got {len(comps)}"
            )
        for c in comps:
            if c.dim != 1:
                raise InvalidDistribution("ProductOfOneDim components must have dim 1")
            if c.family in ("Mixture", "ProductOfOneDim"):
                raise InvalidDistribution("ProductOfOneDim components must be simple families")
        out["components"] = tuple(comps)
        return out
    raise InvalidDistribution(f"unknown family {family!r}")


def _coord_params(spec: DistributionSpec) -> list[float]:
    p = spec.params
    fam = spec.family
    if fam == "UniformCube":
        return [p["low"], p["high"]]
    if fam == "Gaussian":
        return [p["mean"], p["sd"]]
    if fam == "Bernoulli":
        return [p["p"]]
    if fam in ("Cauchy", "Laplace"):
        return [p["loc"], p["scale"]]
    if fam == "Exponential":
        return [p["rate"]]
    if fam == "Pareto":
        return [p["alpha"], p["scale"]]
    if fam == "CantorLike":
        return [float(p["depth"])]
    if fam == "FiniteDiscrete":
        cum = np.cumsum(p["weights"])
        cum[-1] = 1.0
        return [float(len(p["values"])), *p["values"], *cum.tolist()]
    raise InvalidDistribution(f"{fam} has no per-coordinate form")


def _leaves(spec: DistributionSpec) -> list[tuple[float, DistributionSpec]]:
    """Flatten nested mixtures into weighted simple/product leaves."""
    if spec.family != "Mixture":
        return [(1.0, spec)]
    out: list[tuple[float, DistributionSpec]] = []
    for w, comp in zip(spec.params["weights"], spec.params["components"]):
        out.extend((w * cw, leaf) for cw, leaf in _leaves(comp))
    return out


def compile_tables(spec: DistributionSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Compile a spec into (comp_cum, fam_tab, par_tab) kernel tables."""
    leaves = _leaves(spec)
    d = spec.dim
    rows: list[list[tuple[int, list[float]]]] = []
    for _, leaf in leaves:
        if leaf.family == "ProductOfOneDim":
            entries = [
                (_FAMILIES[c.family], _coord_params(c)) for c in leaf.params["components"]
            ]
        else:
            entry = (_FAMILIES[leaf.family], _coord_params(leaf))
            entries = [entry] * d
        rows.append(entries)
    width = max(len(ps) for row in rows for _, ps in row)
    nc = len(rows)
    comp_cum = np.cumsum([w for w, _ in leaves]).astype(np.float64)
    comp_cum[-1] = 1.0
    fam_tab = np.zeros((nc, d), dtype=np.int64)
    par_tab = np.zeros((nc, d, width), dtype=np.float64)
    for ci, row in enumerate(rows):
        for j, (code, ps) in enumerate(row):
            fam_tab[ci, j] = code
            par_tab[ci, j, : len(ps)] = ps
    return comp_cum, fam_tab, par_tab


class Sampler:
    """Compiled sampler for one spec; immutable and thread-friendly.

    All randomness flows through the caller-owned ``numpy`` generator, so
    one sampler may serve many threads if each brings its own stream.
    """

    def __init__(self, spec: DistributionSpec):
        self.spec = spec
        self.dim = spec.dim
        self._tables = compile_tables(spec)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        out = np.empty((1, self.dim))
        _kernel.fill_samples(rng, *self._tables, out)
        return out[0]

    def sample_n(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.empty((n, self.dim))
        _kernel.fill_samples(rng, *self._tables, out)
        return out

    @property
    def tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._tables

    def __repr__(self) -> str:
        return f"Sampler({self.spec.family}, dim={self.dim})"


def make_sampler(spec: DistributionSpec) -> Sampler:
    """Compile ``spec`` to a sampler; raises InvalidDistribution if bad."""
    return Sampler(spec)


def cantor_sample(depth: int, rng: np.random.Generator) -> float:
    """One draw of sum b_k * 2/3^k with i.i.d. fair bits b_k, k <= depth."""
    if not 1 <= depth <= _MAX_CANTOR_DEPTH:
        raise InvalidDistribution(f"depth must be in [1, {_MAX_CANTOR_DEPTH}], got {depth!r}")
    return float(_kernel.cantor_coord(rng, depth))


def two_atom_values(spec: DistributionSpec) -> Optional[tuple[float, float]]:
    """The two atoms of a two-atom law, or None.

    Used for default oscillation regions of discrete runs.
    """
    if spec.family == "Bernoulli":
        return (0.0, 1.0)
    if spec.family == "FiniteDiscrete":
        distinct = sorted(set(spec.params["values"]))
        if len(distinct) == 2:
            return (distinct[0], distinct[1])
    return None


def ternary_prefix_distance(x: float, depth: int) -> float:
    """Distance from x to the set of reals whose first ``depth`` ternary
    digits avoid the digit 1.

    Greedy digit choice is exact because the digit-0 and digit-2 cells
    are disjoint, identical subtrees.
    """
    for _ in range(depth):
        if x >= 0.5:
            x -= 2.0 / 3.0
        x *= 3.0
    over = max(0.0, -x, x - 1.0)
    return over * 3.0 ** (-depth)


def has_clean_ternary_prefix(x: float, depth: int, tol: float = 1e-12) -> bool:
    """True if x is within ``tol`` of a number with no ternary digit 1 in
    its first ``depth`` digits (robust to float rounding at cell edges)."""
    return ternary_prefix_distance(x, depth) <= tol


@dataclass(frozen=True)
class Region:
    """Ball given by center and radius; an interval when d = 1."""

    center: tuple[float, ...]
    radius: float

    @classmethod
    def from_interval(cls, a: float, b: float) -> "Region":
        if not a < b:
            raise ValueError(f"need a < b, got ({a}, {b})")
        return cls(center=((a + b) / 2.0,), radius=(b - a) / 2.0)

    def contains(self, x: Sequence[float], slack: float = 1e-12) -> bool:
        c = np.asarray(self.center, dtype=float)
        return float(np.linalg.norm(np.asarray(x, dtype=float) - c)) <= self.radius + slack


@dataclass(frozen=True)
class RegularityReport:
    """Monte Carlo estimate of the conditional-ball-mass lower bound.

    ``sigma_hat`` is the minimum over tested (probe, radius) pairs of the
    estimated probability that a draw conditioned to land within radius r
    of the probe lands within r*delta. Pairs whose conditioning event got
    zero hits are listed with estimate None and excluded from the
    minimum, never silently counted as pass or fail.
    """

    region: Region
    delta: float
    r_max: float
    sigma_hat: float
    n_samples: int
    conditional_counts: tuple[dict, ...]


def estimate_regularity(
    sampler: Sampler,
    region: Region,
    delta: float,
    r_list: Sequence[float],
    probe_points: Sequence[Sequence[float]],
    n_samples: int,
    rng: np.random.Generator,
) -> RegularityReport:
    """Estimate the regularity lower bound of ``sampler``'s law on a region."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta!r}")
    if n_samples < 1000:
        raise ValueError(f"need n_samples >= 1000, got {n_samples}")
    radii = [float(r) for r in r_list]
    if not radii or any(r <= 0 for r in radii):
        raise ValueError("r_list must be nonempty with positive radii")
    probes = [np.asarray(p, dtype=float).reshape(-1) for p in probe_points]
    if not probes:
        raise ValueError("need at least one probe point")
    for p in probes:
        if p.shape[0] != sampler.dim:
            raise ValueError(f"probe {p} has wrong dimension")
        if not region.contains(p):
            raise ValueError(f"probe {p} lies outside the region")

    samples = sampler.sample_n(rng, n_samples)
    rows: list[dict] = []
    estimates: list[float] = []
    for p in probes:
        dist = np.linalg.norm(samples - p, axis=1)
        for r in radii:
            n_ball = int((dist < r).sum())
            n_inner = int((dist < r * delta).sum())
            est = n_inner / n_ball if n_ball > 0 else None
            if est is not None:
                estimates.append(est)
            rows.append(
                {
                    "probe": tuple(float(v) for v in p),
                    "r": r,
                    "n_ball": n_ball,
                    "n_inner": n_inner,
                    "estimate": est,
                }
            )
    if not estimates:
        raise InsufficientMass("every conditioning ball had zero hits")
    return RegularityReport(
        region=region,
        delta=delta,
        r_max=max(radii),
        sigma_hat=min(estimates),
        n_samples=n_samples,
        conditional_counts=tuple(rows),
    )


@dataclass(frozen=True)
class TailReport:
    """Monte Carlo estimate of the tail-interval mass ratio constant.

    ``c_hat`` is the maximum over grid pairs (a, u) of the ratio of the
    empirical mass of the second interval of length |u| beyond a to that
    of the first. Pairs with an empty denominator and a nonempty
    numerator are reported as indeterminate; pairs empty on both sides
    are vacuous and contribute 0.
    """

    r_plus: float
    r_minus: float
    c_hat: float
    grid: tuple[tuple[float, float], ...]
    worst_pair: Optional[tuple[float, float]]
    n_samples: int
    pairs: tuple[dict, ...]


def estimate_tail_constant(
    sampler: Sampler,
    r_plus: float,
    r_minus: float,
    grid: Sequence[tuple[float, float]],
    n_samples: int,
    rng: np.random.Generator,
) -> TailReport:
    """Estimate the consecutive-tail-interval mass ratio bound for d=1 laws."""
    if sampler.dim != 1:
        raise ValueError("tail estimation applies to one-dimensional laws")
    entries = [(float(a), float(u)) for a, u in grid]
    if not entries:
        raise ValueError("grid must be nonempty")
    for a, u in entries:
        if u > 0 and a < r_plus:
            raise ValueError(f"right-tail entry needs a >= R_plus, got a={a}")
        if u < 0 and a > r_minus:
            raise ValueError(f"left-tail entry needs a <= R_minus, got a={a}")
        if u == 0:
            raise ValueError("grid entries need u != 0")

    s = sampler.sample_n(rng, n_samples)[:, 0]
    rows: list[dict] = []
    c_hat = 0.0
    worst: Optional[tuple[float, float]] = None
    any_ratio = False
    indeterminate = False
    for a, u in entries:
        if u > 0:
            den = int(((s > a) & (s <= a + u)).sum())
            num = int(((s > a + u) & (s <= a + 2 * u)).sum())
        else:
            den = int(((s > a + u) & (s <= a)).sum())
            num = int(((s > a + 2 * u) & (s <= a + u)).sum())
        ratio = num / den if den > 0 else None
        rows.append({"a": a, "u": u, "n_first": den, "n_second": num, "ratio": ratio})
        if ratio is not None:
            any_ratio = True
            if ratio >= c_hat:
                c_hat = ratio
                worst = (a, u)
        elif num > 0:
            indeterminate = True
    if not any_ratio:
        if indeterminate:
            raise InsufficientTailMass(
                "no denominator interval received samples but a numerator did"
            )
        # no tail mass at all: the bound holds vacuously with constant 0
        c_hat = 0.0
        worst = None
    return TailReport(
        r_plus=r_plus,
        r_minus=r_minus,
        c_hat=c_hat,
        grid=tuple(entries),
        worst_pair=worst,
        n_samples=n_samples,
        pairs=tuple(rows),
    )

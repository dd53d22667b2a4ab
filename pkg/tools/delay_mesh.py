"""
Delay & Mesh Tool - time-dependent delays, primary discontinuities, time meshes

This tool provides:
- DelaySpec: tau(t), the deviated argument t - tau(t) and sampling checks of
  the two standing hypotheses (tau >= tau0 > 0, deviated argument strictly
  increasing)
- compute_discontinuities(): primary discontinuity points from
  xi_{mu+1} - tau(xi_{mu+1}) = xi_mu, xi_0 = 0
- build_mesh(): constrained uniform and per-segment uniform meshes that
  contain every xi_mu as a node
- locate(): half-open interval lookup (t_k, t_{k+1}] by binary search
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize

from .errors import (
    BracketFailure,
    DelayBoundViolation,
    EmptySegment,
    NonmonotoneDeviatedArgument,
    OutOfDomain,
    StepExceedsTauZero,
)

logger = logging.getLogger(__name__)

# Sentinel returned by locate() for t <= 0
HISTORY = -1

MeshPolicy = Literal["constrained_uniform", "per_segment_uniform"]

DEFAULT_SAMPLES_PER_UNIT = 10_000
DEFAULT_ROOT_TOL = 1e-12
DEFAULT_MERGE_RTOL = 1e-8


def _evaluate(fn: Callable, ts: np.ndarray) -> np.ndarray:
    try:
        values = np.asarray(fn(ts), dtype=float)
        if values.shape == ts.shape:
            return values
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(t))) for t in ts])


# ==================== Delay ====================

@dataclass(frozen=True, eq=False)
class DelaySpec:
    """
    Time-dependent delay tau(t) with lower bound tau0.

    tau must accept floats; numpy arrays are used when supported.
    history_start defaults to the deviated argument at t = 0.
    """

    tau: Callable[[float], float]
    tau0: float
    history_start: Optional[float] = None
    label: str = "delay"

    def __post_init__(self):
        if self.tau0 <= 0:
            raise DelayBoundViolation(f"tau0 must be positive (no vanishing delay), got {self.tau0}")
        if self.history_start is None:
            object.__setattr__(self, "history_start", float(self.deviated(0.0)))

    def deviated(self, t):
        """t - tau(t); works on floats and arrays."""
        if np.ndim(t):
            ts = np.asarray(t, dtype=float)
            return ts - _evaluate(self.tau, ts)
        return t - self.tau(t)

    def validate(
        self,
        T: float,
        samples_per_unit: int = DEFAULT_SAMPLES_PER_UNIT,
        tol: float = DEFAULT_ROOT_TOL
    ) -> None:
        """
        Check tau >= tau0 and strict monotonicity of t - tau(t) on [0, T] by sampling.

        Raises:
            DelayBoundViolation: tau(t) < tau0 somewhere
            NonmonotoneDeviatedArgument: deviated argument fails to increase
        """
        count = max(2, int(math.ceil(T * samples_per_unit)) + 1)
        ts = np.linspace(0.0, T, count)
        taus = _evaluate(self.tau, ts)
        low = np.argmin(taus)
        if taus[low] < self.tau0 - tol:
            raise DelayBoundViolation(
                f"{self.label}: tau({ts[low]:.6g}) = {taus[low]:.6g} < tau0 = {self.tau0}"
            )
        steps = np.diff(ts - taus)
        bad = np.flatnonzero(steps <= 0)
        if bad.size:
            t_bad = ts[bad[0]]
            raise NonmonotoneDeviatedArgument(
                f"{self.label}: t - tau(t) is not increasing near t = {t_bad:.6g}"
            )


@dataclass(frozen=True)
class DiscontinuitySet:
    """Primary discontinuity points 0 < xi_1 < ... < xi_m < T."""

    xi: Tuple[float, ...]
    T: float
    tau0: float
    history_start: float

    @property
    def boundaries(self) -> Tuple[float, ...]:
        """0, xi_1, ..., xi_m, T: the segment endpoints."""
        return (0.0,) + self.xi + (self.T,)


def compute_discontinuities(
    delay: DelaySpec,
    T: float,
    tol: float = DEFAULT_ROOT_TOL,
    validate: bool = True
) -> DiscontinuitySet:
    """
    Generate xi_1 < xi_2 < ... < T by bracketed root finding on the deviated argument.

    Args:
        delay: Delay descriptor
        T: Horizon
        tol: Tolerance on |deviated(xi_mu) - xi_{mu-1}|
        validate: Run the sampling checks of DelaySpec.validate first

    Returns:
        DiscontinuitySet with all xi_mu < T
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if validate:
        delay.validate(T, tol=tol)

    points: List[float] = []
    previous = 0.0
    while True:
        def residual(t: float, target: float = previous) -> float:
            return float(delay.deviated(t)) - target

        if residual(previous) >= 0:
            raise BracketFailure(
                f"{delay.label}: deviated({previous:.6g}) >= {previous:.6g}, tau is not positive"
            )
        # next point at or beyond T: recursion ends
        if residual(T) <= tol:
            break
        root = optimize.brentq(residual, previous, T, xtol=tol * 1e-4, maxiter=500)
        if T - root <= tol:
            break
        points.append(float(root))
        logger.debug("discontinuity xi_%d = %.15g", len(points), root)
        previous = float(root)

    return DiscontinuitySet(
        xi=tuple(points), T=float(T), tau0=delay.tau0, history_start=delay.history_start
    )


def disc_table(disc: DiscontinuitySet) -> pd.DataFrame:
    """Table with columns mu, xi, segment_start, segment_end (one row per xi_mu)."""
    rows = []
    for mu, xi in enumerate(disc.xi, start=1):
        rows.append({
            "mu": mu,
            "xi": xi,
            "segment_start": disc.boundaries[mu - 1],
            "segment_end": xi,
        })
    return pd.DataFrame(rows, columns=["mu", "xi", "segment_start", "segment_end"])


# ==================== Mesh ====================

@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Time mesh 0 = t_0 < ... < t_N = T containing every xi_mu.

    seg[k] is the 1-based segment index mu of interval k = (t_k, t_{k+1}],
    segment mu being [xi_{mu-1}, xi_mu] with xi_0 = 0 and xi_{m+1} = T.
    """

    nodes: np.ndarray = field(repr=False)
    disc: DiscontinuitySet
    seg: np.ndarray = field(repr=False)
    segment_nodes: Tuple[Tuple[int, int], ...]
    policy: str = "custom"

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def N(self) -> int:
        return len(self.nodes) - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def max_step(self) -> float:
        return float(np.max(self.steps))

    @property
    def ratio_stats(self) -> Dict[str, float]:
        h = self.steps
        if len(h) < 2:
            shrink = grow = 1.0
        else:
            shrink = float(np.max(h[:-1] / h[1:]))
            grow = float(np.max(h[1:] / h[:-1]))
        return {
            "h_max": float(np.max(h)),
            "h_min": float(np.min(h)),
            "max_shrink_ratio": shrink,
            "max_grow_ratio": grow,
        }

    def segment_node_range(self, mu: int) -> Tuple[int, int]:
        """First and last node index of segment mu (1-based)."""
        return self.segment_nodes[mu - 1]

    @classmethod
    def from_nodes(cls, nodes: Sequence[float], disc: DiscontinuitySet, policy: str = "custom") -> "Mesh":
        """
        Wrap explicit node times.

        Raises:
            ValueError: nodes not strictly increasing or not spanning [0, T]
            EmptySegment: some xi_mu is missing from the nodes
        """
        t = np.asarray(nodes, dtype=float)
        tol = 1e-12 * max(1.0, disc.T)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("mesh nodes must be a strictly increasing sequence")
        if abs(t[0]) > tol or abs(t[-1] - disc.T) > tol:
            raise ValueError(f"mesh must span [0, {disc.T}], got [{t[0]}, {t[-1]}]")

        boundary_index = [0]
        for xi in disc.xi:
            idx = int(np.argmin(np.abs(t - xi)))
            if abs(t[idx] - xi) > tol:
                raise EmptySegment(f"discontinuity point {xi} is not a mesh node")
            boundary_index.append(idx)
        boundary_index.append(len(t) - 1)
        segment_nodes = tuple(
            (boundary_index[mu], boundary_index[mu + 1]) for mu in range(len(boundary_index) - 1)
        )
        for lo, hi in segment_nodes:
            if hi <= lo:
                raise EmptySegment(f"segment between nodes {lo} and {hi} has no interval")

        seg = np.empty(len(t) - 1, dtype=int)
        for mu, (lo, hi) in enumerate(segment_nodes, start=1):
            seg[lo:hi] = mu
        t.setflags(write=False)
        seg.setflags(write=False)
        return cls(nodes=t, disc=disc, seg=seg, segment_nodes=segment_nodes, policy=policy)


def _merge_points(uniform: List[float], extra: Sequence[float], merge_tol: float) -> List[float]:
    points = list(uniform)
    for x in extra:
        distances = [abs(p - x) for p in points]
        nearest = int(np.argmin(distances))
        if distances[nearest] < merge_tol:
            points[nearest] = x
        else:
            points.append(x)
    return sorted(points)


def build_mesh(
    disc: DiscontinuitySet,
    base_h: float,
    T: Optional[float] = None,
    policy: MeshPolicy = "constrained_uniform",
    merge_rtol: float = DEFAULT_MERGE_RTOL
) -> Mesh:
    """
    Build a mesh with maximum step base_h that contains every xi_mu.

    constrained_uniform: {k base_h} U {xi_mu} U {T}, nodes closer than
    base_h * merge_rtol merged onto the exact xi_mu (or T).
    per_segment_uniform: each [xi_{mu-1}, xi_mu] split into
    ceil(length / base_h) equal steps.

    Raises:
        StepExceedsTauZero: base_h > tau0
        EmptySegment: merging collapsed a segment
    """
    T = disc.T if T is None else float(T)
    if base_h <= 0:
        raise ValueError(f"base_h must be positive, got {base_h}")
    if base_h > disc.tau0 * (1 + 1e-12):
        raise StepExceedsTauZero(f"base_h = {base_h} exceeds tau0 = {disc.tau0}")

    merge_tol = base_h * merge_rtol
    xi = [x for x in disc.xi if x < T]
    boundaries = [0.0] + xi + [T]
    if np.any(np.diff(boundaries) <= merge_tol):
        raise EmptySegment(f"discontinuity points {xi} leave an empty segment on [0, {T}]")

    if policy == "constrained_uniform":
        count = int(math.floor(T / base_h)) + 1
        uniform = [k * base_h for k in range(count) if k * base_h < T - merge_tol]
        nodes = _merge_points(uniform, xi, merge_tol) + [T]
    elif policy == "per_segment_uniform":
        nodes = [0.0]
        for a, b in zip(boundaries[:-1], boundaries[1:]):
            steps = max(1, int(math.ceil((b - a) / base_h - 1e-9)))
            inner = np.linspace(a, b, steps + 1)[1:-1]
            nodes.extend(inner.tolist())
            nodes.append(b)
    else:
        raise ValueError(f"unknown mesh policy '{policy}'")

    if np.any(np.diff(nodes) <= 0):
        raise EmptySegment("mesh construction produced a zero-length step")

    local_disc = disc if T == disc.T else DiscontinuitySet(
        xi=tuple(xi), T=T, tau0=disc.tau0, history_start=disc.history_start
    )
    mesh = Mesh.from_nodes(nodes, local_disc, policy=policy)
    logger.debug("built %s mesh: N=%d, ratio stats %s", policy, mesh.N, mesh.ratio_stats)
    return mesh


def locate(mesh: Mesh, t: float) -> int:
    """
    Interval index k with t in (t_k, t_{k+1}], or HISTORY for t <= 0.

    Raises:
        OutOfDomain: t < history_start or t > T
    """
    tol = 1e-13 * max(1.0, mesh.T)
    if t < mesh.disc.history_start - tol or t > mesh.T + tol:
        raise OutOfDomain(f"t = {t} outside [{mesh.disc.history_start}, {mesh.T}]")
    if t <= 0.0:
        return HISTORY
    k = int(np.searchsorted(mesh.nodes, t, side="left")) - 1
    return min(max(k, 0), mesh.N - 1)

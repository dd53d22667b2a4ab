"""
History Store Service - continuous extensions of the numerical solution

Stores are appended to by the integrator, one completed mesh interval at a
time, and answer delayed-argument queries u(t - tau(t)):

- InterpolantStore: Lagrange interpolant through {t_k, stage times, t_{k+1}}
  of each interval (ERKC-I)
- ModifiedInterpolantStore: s+2 mesh-node stencils kept inside one
  smoothness segment [xi_{mu-1}, xi_mu] (modified ERKC-I)
- ExponentialDenseOutput: the exponential continuous solution
  W(t_k + theta h) = e^{-theta h A} W_k + h sum_i b_i(theta; -hA) G_{k,i}
  (ERKC-C)

For t <= 0 every store falls back to the problem history. Appends are
sequential; a record becomes visible to readers once append() returns.
"""

import logging
import math
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.interpolate import BarycentricInterpolator

from tools.delay_mesh import HISTORY, Mesh, locate
from tools.errors import FutureEvaluation, OutOfDomain, StencilUnavailable
from tools.phi_functions import CollocationScheme, weight_b
from tools.spectral_operator import DiagonalizableOperator

logger = logging.getLogger(__name__)

HistoryFunction = Callable[[float], np.ndarray]

# Node coincidence tolerance when collapsing c_1 = 0 / c_s = 1
NODE_TOL = 1e-14


class IntervalData(Protocol):
    """What a store needs from one completed step (see integrators.StepRecord)."""

    index: int
    t_left: float
    h: float
    u_left: np.ndarray
    stages: np.ndarray
    g: np.ndarray
    u_right: np.ndarray


# ==================== Base store ====================

class HistoryStore(ABC):
    """
    Append-only continuous extension on a fixed mesh.

    Args:
        mesh: Time mesh of the run
        history: Initial function for t <= 0
    """

    kind = "base"

    def __init__(self, mesh: Mesh, history: HistoryFunction):
        self.mesh = mesh
        self.history = history
        self._records: List[Optional[IntervalData]] = []
        self._pruned_until = 0

    @property
    def completed_intervals(self) -> int:
        return len(self._records)

    @property
    def completed_until(self) -> float:
        """Right end of the last completed interval (0 before the first append)."""
        return float(self.mesh.nodes[len(self._records)])

    def append(self, record: IntervalData) -> None:
        if record.index != len(self._records):
            raise ValueError(
                f"history records must be appended in order: expected interval "
                f"{len(self._records)}, got {record.index}"
            )
        self._on_append(record)
        self._records.append(record)

    def _on_append(self, record: IntervalData) -> None:
        pass

    def record(self, k: int) -> IntervalData:
        if k < self._pruned_until:
            raise OutOfDomain(f"interval {k} was pruned (first retained: {self._pruned_until})")
        return self._records[k]

    def interval_of(self, t: float) -> int:
        """
        Interval index holding t, HISTORY for t <= 0.

        Raises:
            OutOfDomain: t outside [history_start, T]
            FutureEvaluation: t beyond the completed range
        """
        k = locate(self.mesh, t)
        if k != HISTORY and k >= len(self._records):
            raise FutureEvaluation(
                f"t = {t} lies beyond the completed range (completed until {self.completed_until})"
            )
        return k

    def theta(self, k: int, t: float) -> float:
        t_left = self.mesh.nodes[k]
        h = self.mesh.nodes[k + 1] - t_left
        return min(max((t - t_left) / h, 0.0), 1.0)

    def evaluate(self, t: float, history: Optional[HistoryFunction] = None) -> np.ndarray:
        """u(t) from the history for t <= 0, from the completed intervals otherwise."""
        k = self.interval_of(t)
        if k == HISTORY:
            return np.asarray((history or self.history)(t), dtype=float)
        return self._evaluate_interval(k, t)

    @abstractmethod
    def _evaluate_interval(self, k: int, t: float) -> np.ndarray:
        ...

    def prune_before(self, t: float) -> int:
        """
        Drop interval records ending before t. Returns the number dropped.

        Only safe when no later query reaches back before t; with a monotone
        deviated argument that is t <= deviated(current stage time).
        """
        dropped = 0
        for k in range(self._pruned_until, len(self._records)):
            if self.mesh.nodes[k + 1] >= t:
                break
            self._records[k] = None
            dropped += 1
        self._pruned_until += dropped
        if dropped:
            logger.debug("%s: pruned %d intervals before t=%.6g", self.kind, dropped, t)
        return dropped


# ==================== ERKC-I interpolant ====================

class InterpolantStore(HistoryStore):
    """
    Piecewise Lagrange interpolant through the node and stage values of each interval.

    Node set per interval in theta coordinates: {0, c_1, ..., c_s, 1} with
    c_1 = 0 merged into the left node (U_k kept) and c_s = 1 merged into
    the right node (U_{k+1} kept); the degree is s-1, s or s+1 accordingly.
    """

    kind = "interpolant"

    def __init__(self, mesh: Mesh, history: HistoryFunction, scheme: CollocationScheme):
        super().__init__(mesh, history)
        self.scheme = scheme
        self._left_shared = abs(scheme.c[0]) <= NODE_TOL
        self._right_shared = abs(scheme.c[-1] - 1.0) <= NODE_TOL
        inner = list(scheme.c)
        if self._left_shared:
            inner = inner[1:]
        if self._right_shared:
            inner = inner[:-1]
        self.theta_nodes = np.array([0.0] + inner + [1.0])
        self._interpolants: Dict[int, BarycentricInterpolator] = {}

    @property
    def degree(self) -> int:
        return len(self.theta_nodes) - 1

    def _node_values(self, record: IntervalData) -> np.ndarray:
        stages = np.asarray(record.stages)
        first = 1 if self._left_shared else 0
        last = len(stages) - 1 if self._right_shared else len(stages)
        return np.vstack([record.u_left, stages[first:last], record.u_right])

    def _on_append(self, record: IntervalData) -> None:
        self._interpolants[record.index] = BarycentricInterpolator(
            self.theta_nodes, self._node_values(record), axis=0
        )

    def _evaluate_interval(self, k: int, t: float) -> np.ndarray:
        self.record(k)
        return np.asarray(self._interpolants[k](self.theta(k, t)))

    def prune_before(self, t: float) -> int:
        first = self._pruned_until
        dropped = super().prune_before(t)
        for k in range(first, first + dropped):
            self._interpolants.pop(k, None)
        return dropped


# ==================== Modified ERKC-I interpolant ====================

class ModifiedInterpolantStore(HistoryStore):
    """
    Interpolant through s+2 consecutive mesh nodes of one smoothness segment.

    For interval k the stencil is t_{k-l+1}, ..., t_{k+r} with l + r = s + 2.
    The symmetric choice l = ceil((s+2)/2) is shifted toward the segment
    interior (and left of the last completed node) until it fits.
    """

    kind = "modified"

    def __init__(self, mesh: Mesh, history: HistoryFunction, scheme: CollocationScheme):
        super().__init__(mesh, history)
        self.scheme = scheme
        self.width = scheme.s + 2
        self._node_values: Dict[int, np.ndarray] = {}
        self._interpolants: Dict[Tuple[int, int], BarycentricInterpolator] = {}

    def _on_append(self, record: IntervalData) -> None:
        if record.index == 0:
            self._node_values[0] = np.asarray(record.u_left, dtype=float)
        self._node_values[record.index + 1] = np.asarray(record.u_right, dtype=float)

    def stencil_for(self, k: int, last_node: Optional[int] = None) -> Dict[str, Union[int, List[int]]]:
        """
        Stencil of interval k.

        Args:
            k: Interval index (0-based)
            last_node: Highest usable node index (defaults to the last mesh node)

        Returns:
            Dict with left (l_k), right (r_k), nodes (node indices), segment (mu)

        Raises:
            StencilUnavailable: the segment (up to last_node) holds fewer than s+2 nodes
        """
        mu = int(self.mesh.seg[k])
        lo, hi = self.mesh.segment_node_range(mu)
        upper = hi if last_node is None else min(hi, last_node)
        if upper - lo + 1 < self.width:
            raise StencilUnavailable(
                f"interval {k}: segment {mu} offers {upper - lo + 1} usable nodes, "
                f"the stencil needs {self.width}"
            )
        left = math.ceil(self.width / 2)
        first = k - left + 1
        last = first + self.width - 1
        if first < lo:
            first, last = lo, lo + self.width - 1
        if last > upper:
            first, last = upper - self.width + 1, upper
        return {
            "left": k - first + 1,
            "right": last - k,
            "nodes": list(range(first, last + 1)),
            "segment": mu,
        }

    def _evaluate_interval(self, k: int, t: float) -> np.ndarray:
        self.record(k)
        stencil = self.stencil_for(k, last_node=len(self._records))
        first, last = stencil["nodes"][0], stencil["nodes"][-1]
        t_first, t_last = self.mesh.nodes[first], self.mesh.nodes[last]
        interpolant = self._interpolants.get((first, last))
        if interpolant is None:
            # stencil-local coordinate in [0, 1]
            local = (self.mesh.nodes[first:last + 1] - t_first) / (t_last - t_first)
            values = np.vstack([self._node_values[q] for q in range(first, last + 1)])
            interpolant = BarycentricInterpolator(local, values, axis=0)
            self._interpolants[(first, last)] = interpolant
        return np.asarray(interpolant((t - t_first) / (t_last - t_first)))

    def check_stencils(self) -> Dict[str, object]:
        """Scan every interval and confirm no stencil crosses a discontinuity point."""
        crossings = []
        unavailable = []
        xi = np.asarray(self.mesh.disc.xi)
        for k in range(self.mesh.N):
            try:
                nodes = self.stencil_for(k)["nodes"]
            except StencilUnavailable:
                unavailable.append(k)
                continue
            a, b = self.mesh.nodes[nodes[0]], self.mesh.nodes[nodes[-1]]
            if np.any((xi > a) & (xi < b)):
                crossings.append(k)
        passed = not crossings
        return {
            "status": "success" if passed else "error",
            "passed": passed,
            "crossing_intervals": crossings,
            "unavailable_intervals": unavailable,
            "message": (
                "all stencils stay inside their segment" if passed
                else f"{len(crossings)} stencils cross a discontinuity point"
            ),
        }

    def prune_before(self, t: float) -> int:
        dropped = super().prune_before(t)
        # keep one stencil width of node values behind the first retained interval
        keep_from = self._pruned_until - self.width
        for q in [q for q in self._node_values if q < keep_from]:
            del self._node_values[q]
        for key in [key for key in self._interpolants if key[1] < self._pruned_until]:
            del self._interpolants[key]
        return dropped


# ==================== ERKC-C dense output ====================

class ExponentialDenseOutput(HistoryStore):
    """
    Exponential continuous solution of the ERKC-C method.

    Each record keeps W_k and the stage nonlinearities G_{k,i} in the
    eigenbasis; one evaluation costs one inverse transform.
    """

    kind = "dense"

    def __init__(
        self,
        mesh: Mesh,
        history: HistoryFunction,
        operator: DiagonalizableOperator,
        scheme: CollocationScheme
    ):
        super().__init__(mesh, history)
        self.operator = operator
        self.scheme = scheme
        self._spectral: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def _on_append(self, record: IntervalData) -> None:
        w_hat = self.operator.forward(np.asarray(record.u_left, dtype=float))
        g_hat = self.operator.forward(np.asarray(record.g, dtype=float))
        self._spectral[record.index] = (w_hat, g_hat)

    def evaluate_theta(self, k: int, theta: float) -> np.ndarray:
        """W(t_k + theta h_k) for theta in [0, 1]."""
        record = self.record(k)
        w_hat, g_hat = self._spectral[k]
        z = -record.h * self.operator.eigenvalues
        coeffs = np.exp(theta * z) * w_hat
        for i in range(self.scheme.s):
            coeffs = coeffs + record.h * weight_b(self.scheme, i + 1, theta, z) * g_hat[i]
        return self.operator.inverse(coeffs)

    def _evaluate_interval(self, k: int, t: float) -> np.ndarray:
        return self.evaluate_theta(k, self.theta(k, t))

    def prune_before(self, t: float) -> int:
        first = self._pruned_until
        dropped = super().prune_before(t)
        for k in range(first, first + dropped):
            self._spectral.pop(k, None)
        return dropped


# ==================== Functional interface ====================

def eval_interpolant(store: InterpolantStore, history: HistoryFunction, t: float) -> np.ndarray:
    """ERKC-I delayed value: history for t <= 0, interval interpolant otherwise."""
    return store.evaluate(t, history=history)


def eval_modified(store: ModifiedInterpolantStore, history: HistoryFunction, t: float) -> np.ndarray:
    """Modified ERKC-I delayed value from the s+2 node segment stencil."""
    return store.evaluate(t, history=history)


def eval_dense(
    store: ExponentialDenseOutput,
    history: HistoryFunction,
    operator: DiagonalizableOperator,
    scheme: CollocationScheme,
    t: float
) -> np.ndarray:
    """ERKC-C delayed value from the exponential dense output."""
    if operator is not store.operator or scheme is not store.scheme:
        raise ValueError("dense output was built for a different operator or scheme")
    return store.evaluate(t, history=history)


def make_history_store(
    method: str,
    mesh: Mesh,
    history: HistoryFunction,
    operator: DiagonalizableOperator,
    scheme: CollocationScheme
) -> HistoryStore:
    """Store matching a method name (erkc_i, erkc_c, merkc_i)."""
    if method == "erkc_i":
        return InterpolantStore(mesh, history, scheme)
    if method == "merkc_i":
        return ModifiedInterpolantStore(mesh, history, scheme)
    if method == "erkc_c":
        return ExponentialDenseOutput(mesh, history, operator, scheme)
    raise ValueError(f"unknown method '{method}'")


def _relative_gap(value: np.ndarray, stored: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(stored))), 1e-300)
    return float(np.max(np.abs(value - stored))) / scale


def check_node_consistency(store: HistoryStore, tol: float = 1e-10) -> Dict[str, object]:
    """
    Re-evaluate a store at every retained node (and stage time, except for
    the modified store) and compare with the stored values.

    Returns:
        Report dict with status, max_deviation, worst_interval, message
    """
    worst, worst_k = 0.0, None
    for k in range(store._pruned_until, store.completed_intervals):
        record = store.record(k)
        checks = [(1.0, record.u_right)]
        if not isinstance(store, ModifiedInterpolantStore):
            checks += list(zip(store.scheme.c, record.stages))
        for theta, stored in checks:
            if isinstance(store, ExponentialDenseOutput):
                value = store.evaluate_theta(k, float(theta))
            else:
                t = record.t_left + float(theta) * record.h
                value = store._evaluate_interval(k, t)
            gap = _relative_gap(value, np.asarray(stored))
            if gap > worst:
                worst, worst_k = gap, k
    passed = worst <= tol
    return {
        "status": "success" if passed else "error",
        "passed": passed,
        "max_deviation": worst,
        "worst_interval": worst_k,
        "message": f"{store.kind}: max relative node deviation {worst:.2e} (tol {tol:.0e})",
    }


def dump_dense_csv(store: HistoryStore, times: Sequence[float], path: Union[str, Path]) -> pd.DataFrame:
    """
    Sample a store at the given times and write columns t, dof_0, ... to CSV.

    Returns the written DataFrame.
    """
    samples = np.vstack([store.evaluate(float(t)) for t in times])
    frame = pd.DataFrame(samples, columns=[f"dof_{j}" for j in range(samples.shape[1])])
    frame.insert(0, "t", np.asarray(times, dtype=float))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"#schema=1 store={store.kind}\n")
        frame.to_csv(handle, index=False, float_format="%.17g")
    logger.info("dense output samples written to %s (%d rows)", path, len(frame))
    return frame

"""
ERKC Integrator - exponential Runge-Kutta collocation time stepping

Methods:
- erkc_i:  delayed values from the piecewise Lagrange interpolant of
           node and stage values
- erkc_c:  delayed values from the method's exponential dense output
- merkc_i: delayed values from s+2 mesh-node stencils inside one
           smoothness segment

Each step solves the coupled stage system
    U_{n,i} = e^{-c_i h A} U_n + h sum_j a_ij(-hA) G_{n,j}
by fixed-point iteration from the predictor e^{-c_i h A} U_n, then
    U_{n+1} = e^{-hA} U_n + h sum_i b_i(-hA) G_{n,i}.
All operator functions are applied in the eigenbasis of A.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from services.history_store import HistoryStore, make_history_store
from tools.delay_mesh import Mesh
from tools.errors import ERKCError, FixedPointDivergence, StepExceedsTauZero
from tools.phi_functions import CollocationScheme
from tools.problem_defs import ProblemSpec
from tools.spectral_operator import StepSymbols, weight_symbols

logger = logging.getLogger(__name__)

Method = Literal["erkc_i", "erkc_c", "merkc_i"]
METHODS = ("erkc_i", "erkc_c", "merkc_i")

DEFAULT_FP_TOL = 1e-12
DEFAULT_FP_MAX_ITER = 100

# Slack for delayed arguments that land on t_n up to round-off
DELAY_SLACK = 1e-12


def normalize_method(name: str) -> str:
    """Accept 'erkc-c', 'ERKC_C', 'merkc-i' ... and return the canonical name."""
    method = name.strip().lower().replace("-", "_")
    if method not in METHODS:
        raise ValueError(f"unknown method '{name}', expected one of {list(METHODS)}")
    return method


@dataclass(frozen=True)
class MethodConfig:
    """
    Method and stage-solver settings for one run.

    measure_residual re-evaluates the stage right-hand side after convergence
    (one extra sweep per step) to report the stage residual.
    prune_history drops history intervals no later query can reach.
    """

    method: Method
    scheme: CollocationScheme
    fp_tol: float = DEFAULT_FP_TOL
    fp_max_iter: int = DEFAULT_FP_MAX_ITER
    track_global_error: bool = False
    measure_residual: bool = False
    prune_history: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", normalize_method(self.method))
        if not self.fp_tol > 0:
            raise ValueError(f"fp_tol must be positive, got {self.fp_tol}")
        if self.fp_max_iter < 1:
            raise ValueError(f"fp_max_iter must be >= 1, got {self.fp_max_iter}")
        if self.method == "merkc_i" and self.scheme.quadrature_order < self.scheme.s + 2:
            logger.warning(
                "merkc_i with %s nodes %s: quadrature order %d < s+2 = %d, "
                "full order s+1+beta is not expected",
                self.scheme.name, self.scheme.c, self.scheme.quadrature_order, self.scheme.s + 2,
            )


@dataclass(eq=False)
class StepRecord:
    """One completed interval (t_n, t_n + h]."""

    index: int
    t_left: float
    h: float
    u_left: np.ndarray = field(repr=False)
    stages: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    u_right: np.ndarray = field(repr=False)
    iterations: int
    residual: Optional[float] = None


@dataclass(eq=False)
class Trajectory:
    """Node values of a run plus the populated history store and run report."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    store: HistoryStore = field(repr=False)
    iterations: List[int] = field(repr=False)
    report: Dict

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]


# ==================== Single step ====================

def _delayed_values(
    problem: ProblemSpec,
    store: HistoryStore,
    stage_times: np.ndarray,
    t_n: float
) -> List[np.ndarray]:
    values = []
    for t_stage in stage_times:
        d = float(problem.delay.deviated(t_stage))
        if t_n < d <= t_n + DELAY_SLACK * max(1.0, abs(t_n)):
            d = t_n
        values.append(store.evaluate(d))
    return values


def _stage_sweep(
    problem: ProblemSpec,
    symbols: StepSymbols,
    u_hat: np.ndarray,
    stage_times: np.ndarray,
    stages: np.ndarray,
    delayed: List[np.ndarray]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (G, G in eigenbasis, new stages) for one fixed-point sweep."""
    op = problem.operator
    g = np.vstack([
        problem.g(float(t_i), stages[i], delayed[i]) for i, t_i in enumerate(stage_times)
    ])
    g_hat = op.forward(g)
    stage_hat = symbols.exp_stage * u_hat + symbols.h * np.einsum("ijk,jk->ik", symbols.a, g_hat)
    return g, g_hat, op.inverse(stage_hat)


def step(
    problem: ProblemSpec,
    mesh: Mesh,
    config: MethodConfig,
    n: int,
    u_n: np.ndarray,
    store: HistoryStore,
    symbols: Optional[StepSymbols] = None
) -> Tuple[np.ndarray, StepRecord]:
    """
    Advance from t_n to t_{n+1} and append the interval to the history store.

    Args:
        problem: Problem definition
        mesh: Time mesh
        config: Method configuration
        n: Interval index (0-based)
        u_n: Solution at t_n
        store: History store completed through t_n
        symbols: Precomputed multipliers for this step size (optional)

    Returns:
        (U_{n+1}, StepRecord)

    Raises:
        StepExceedsTauZero: h_{n+1} > tau0
        FixedPointDivergence: no convergence within fp_max_iter sweeps
    """
    op = problem.operator
    scheme = config.scheme
    t_n = float(mesh.nodes[n])
    h = float(mesh.nodes[n + 1]) - t_n
    if h > problem.delay.tau0 * (1.0 + 1e-12):
        raise StepExceedsTauZero(f"step {h} exceeds tau0 = {problem.delay.tau0}")
    if symbols is None:
        symbols = weight_symbols(op, scheme, h)
    h = symbols.h

    stage_times = t_n + scheme.nodes * h
    delayed = _delayed_values(problem, store, stage_times, t_n)

    u_hat = op.forward(np.asarray(u_n, dtype=float))
    stages = op.inverse(symbols.exp_stage * u_hat)
    for iteration in range(1, config.fp_max_iter + 1):
        g, g_hat, new_stages = _stage_sweep(problem, symbols, u_hat, stage_times, stages, delayed)
        if not np.all(np.isfinite(new_stages)):
            raise FixedPointDivergence(f"stage values became non-finite at sweep {iteration}")
        diff = float(np.max(np.abs(new_stages - stages)))
        scale = float(np.max(np.abs(new_stages)))
        stages = new_stages
        if diff <= config.fp_tol * scale or diff == 0.0:
            break
    else:
        raise FixedPointDivergence(
            f"no convergence after {config.fp_max_iter} sweeps (last change {diff:.3e}, "
            f"relative {diff / max(scale, 1e-300):.3e})"
        )

    residual = None
    if config.measure_residual:
        _, _, check = _stage_sweep(problem, symbols, u_hat, stage_times, stages, delayed)
        residual = float(np.max(np.abs(check - stages)) / max(float(np.max(np.abs(stages))), 1e-300))

    u_next = op.inverse(symbols.exp_step * u_hat + h * np.einsum("ik,ik->k", symbols.b, g_hat))
    record = StepRecord(
        index=n,
        t_left=t_n,
        h=h,
        u_left=np.asarray(u_n, dtype=float),
        stages=stages,
        g=g,
        u_right=u_next,
        iterations=iteration,
        residual=residual,
    )
    store.append(record)
    logger.debug("step %d: t=%.6g h=%.3e fixed-point sweeps=%d", n, t_n + h, h, iteration)
    return u_next, record


# ==================== Full run ====================

def integrate(
    problem: ProblemSpec,
    mesh: Mesh,
    config: MethodConfig,
    store: Optional[HistoryStore] = None
) -> Trajectory:
    """
    Integrate over every interval of the mesh.

    Returns:
        Trajectory with node values, history store and run report

    Raises:
        StepExceedsTauZero: mesh step above tau0
        ERKCError: step failure, message prefixed with the interval index
    """
    if mesh.max_step > problem.delay.tau0 * (1.0 + 1e-12):
        raise StepExceedsTauZero(
            f"mesh max step {mesh.max_step} exceeds tau0 = {problem.delay.tau0}"
        )
    if mesh.T > problem.T * (1.0 + 1e-12):
        raise ValueError(f"mesh ends at {mesh.T}, beyond the problem horizon {problem.T}")
    if store is None:
        store = make_history_store(config.method, mesh, problem.history, problem.operator, config.scheme)

    started = time.perf_counter()
    symbols_cache: Dict[float, StepSymbols] = {}
    values = np.empty((mesh.N + 1, problem.operator.dof))
    values[0] = problem.history(0.0)
    iterations: List[int] = []
    max_residual = None
    global_error = 0.0 if (config.track_global_error and problem.has_exact) else None

    for n in range(mesh.N):
        h = float(mesh.nodes[n + 1] - mesh.nodes[n])
        key = round(h, 14)
        symbols = symbols_cache.get(key)
        if symbols is None:
            symbols = weight_symbols(problem.operator, config.scheme, h)
            symbols_cache[key] = symbols
        try:
            values[n + 1], record = step(problem, mesh, config, n, values[n], store, symbols)
        except ERKCError as exc:
            raise type(exc)(f"interval {n} (t = {mesh.nodes[n]:.6g}): {exc}") from exc
        iterations.append(record.iterations)
        if record.residual is not None:
            max_residual = max(max_residual or 0.0, record.residual)
        if global_error is not None:
            error = float(np.max(np.abs(values[n + 1] - problem.exact(float(mesh.nodes[n + 1])))))
            global_error = max(global_error, error)
        if config.prune_history and n + 1 < mesh.N:
            store.prune_before(float(problem.delay.deviated(mesh.nodes[n + 1])))

    wall_time = time.perf_counter() - started
    report = {
        "status": "success",
        "problem": problem.label,
        "method": config.method,
        "scheme": config.scheme.name,
        "nodes": list(config.scheme.c),
        "steps": mesh.N,
        "fp_iterations": {
            "total": int(np.sum(iterations)),
            "mean": float(np.mean(iterations)),
            "max": int(np.max(iterations)),
        },
        "wall_time": wall_time,
        "ratio_stats": mesh.ratio_stats,
        "max_stage_residual": max_residual,
        "global_error": global_error,
    }
    logger.info(
        "%s %s s=%d on %s: %d steps in %.3fs, mean %.2f sweeps/step",
        config.method, config.scheme.name, config.scheme.s, problem.label,
        mesh.N, wall_time, report["fp_iterations"]["mean"],
    )
    return Trajectory(
        times=np.array(mesh.nodes),
        values=values,
        store=store,
        iterations=iterations,
        report=report,
    )


def verify_no_future_reference(
    problem: ProblemSpec,
    mesh: Union[Mesh, Sequence[float]],
    scheme: Optional[CollocationScheme] = None
) -> bool:
    """
    True iff every stage's delayed argument t_{n,i} - tau(t_{n,i}) is <= t_n.

    mesh may also be a bare sequence of node times (which need not contain
    the discontinuity points). Without a scheme the right endpoint t_{n+1} is
    checked, which covers all nodes in [0, 1] because the deviated argument
    is increasing.
    """
    nodes = mesh.nodes if isinstance(mesh, Mesh) else np.asarray(mesh, dtype=float)
    c = np.array([1.0]) if scheme is None else scheme.nodes
    for n in range(len(nodes) - 1):
        t_n = float(nodes[n])
        h = float(nodes[n + 1]) - t_n
        for c_i in c:
            d = float(problem.delay.deviated(t_n + c_i * h))
            if d > t_n + DELAY_SLACK * max(1.0, abs(t_n)):
                return False
    return True

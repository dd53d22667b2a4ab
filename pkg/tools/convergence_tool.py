"""
Convergence Tool - error norms, order fits and convergence studies

This tool provides:
- error_norm: Linf, grid-weighted L2 and spectral V_alpha norms of a difference
- fit_order: pairwise orders and least-squares slope over the asymptotic window
- ConvergenceStudy / run_study: method x step-size sweeps on the benchmarks,
  measured at the final time T against the exact or a computed reference
- write_study_csv: versioned CSV output (#schema=1 header line)
- parse_step_sizes: '2^-3..2^-8' octave sweeps or comma lists
"""

import io
import logging
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from integrators.erkc_integrator import MethodConfig, Trajectory, integrate, normalize_method
from .delay_mesh import build_mesh, compute_discontinuities
from .errors import DimensionError, ERKCError, InsufficientData
from .phi_functions import scheme_from_name
from .problem_defs import ProblemSpec, get_problem, has_exact_solution
from .spectral_operator import DiagonalizableOperator, apply_fractional_power, mesh_width

logger = logging.getLogger(__name__)

Norm = Literal["linf", "l2", "v_alpha"]
NORMS = ("linf", "l2", "v_alpha")
CSV_SCHEMA = 1

# Pairwise orders further than this from the median mark the window ends
ORDER_DEVIATION = 1.0
MIN_FIT_POINTS = 3

# Base step of the computed reference per benchmark
REFERENCE_STEPS = {"ex2": 2.0 ** -11, "ex3": 2.0 ** -14}
DEFAULT_REFERENCE_H = 2.0 ** -11


# ==================== Error norms ====================

def error_norm(
    u_num: np.ndarray,
    u_ref: np.ndarray,
    norm: Norm = "linf",
    operator: Optional[DiagonalizableOperator] = None,
    alpha: float = 0.0
) -> float:
    """
    Norm of u_num - u_ref.

    Args:
        u_num: Numerical solution (flat state vector)
        u_ref: Reference solution with the same layout
        norm: 'linf', 'l2' (weight h_x per dimension) or 'v_alpha' (L2 norm of A^alpha d)
        operator: Grid operator, required for 'l2' and 'v_alpha'
        alpha: Power for 'v_alpha'

    Raises:
        DimensionError: layouts differ
    """
    u_num = np.asarray(u_num, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    if u_num.shape != u_ref.shape:
        raise DimensionError(f"cannot compare shapes {u_num.shape} and {u_ref.shape}")
    diff = u_num - u_ref
    if norm == "linf":
        return float(np.max(np.abs(diff))) if diff.size else 0.0
    if norm not in NORMS:
        raise ValueError(f"unknown norm '{norm}', expected one of {list(NORMS)}")
    if operator is None:
        raise ValueError(f"norm '{norm}' needs the grid operator")
    if diff.shape != (operator.dof,):
        raise DimensionError(f"difference of shape {diff.shape} does not match {operator.dof} DOF")
    if norm == "v_alpha":
        diff = apply_fractional_power(operator, alpha, diff)
    weight = mesh_width(operator) ** operator.ndim
    return float(math.sqrt(weight * float(np.sum(diff ** 2))))


# ==================== Order fits ====================

@dataclass
class OrderFit:
    """
    Observed convergence order of a step-size sweep.

    pairwise[i] is the order between points i and i+1 (hs decreasing).
    used lists the indices inside the asymptotic window; excluded records
    every dropped point with the reason.
    """

    hs: List[float]
    errors: List[float]
    pairwise: List[float]
    slope: float
    used: List[int]
    excluded: List[Dict[str, Union[float, str]]] = field(default_factory=list)

    @property
    def window(self) -> Tuple[float, float]:
        return self.hs[self.used[0]], self.hs[self.used[-1]]


def _pairwise_orders(hs: Sequence[float], errors: Sequence[float]) -> List[float]:
    return [
        math.log(errors[i] / errors[i + 1]) / math.log(hs[i] / hs[i + 1])
        for i in range(len(hs) - 1)
    ]


def fit_order(
    errors: Sequence[Tuple[float, float]],
    floor: float = 0.0,
    floor_factor: float = 100.0
) -> OrderFit:
    """
    Fit e(h) ~ C h^q over the asymptotic window.

    Points with error below floor_factor * floor (the reference accuracy) or
    non-positive error are dropped. The window is then shrunk from either end
    while the end pairwise order deviates from the median pairwise order by
    more than one, keeping at least three points.

    Args:
        errors: (h, error) pairs
        floor: Estimated accuracy of the reference solution
        floor_factor: Multiple of the floor below which errors are ignored

    Raises:
        InsufficientData: fewer than three usable points
    """
    points = sorted(((float(h), float(e)) for h, e in errors), key=lambda p: -p[0])
    hs = [h for h, _ in points]
    es = [e for _, e in points]
    if len(points) < MIN_FIT_POINTS:
        raise InsufficientData(f"an order fit needs at least {MIN_FIT_POINTS} points, got {len(points)}")

    excluded: List[Dict[str, Union[float, str]]] = []
    kept = []
    for idx, (h, e) in enumerate(points):
        if not e > 0:
            excluded.append({"h": h, "reason": "non-positive error"})
        elif e < floor_factor * floor:
            excluded.append({"h": h, "reason": f"below {floor_factor:g} x reference floor {floor:.2e}"})
        else:
            kept.append(idx)
    if len(kept) < MIN_FIT_POINTS:
        raise InsufficientData(
            f"only {len(kept)} points above the reference floor, need {MIN_FIT_POINTS}"
        )

    while len(kept) > MIN_FIT_POINTS:
        orders = _pairwise_orders([hs[i] for i in kept], [es[i] for i in kept])
        median = float(np.median(orders))
        if abs(orders[0] - median) > ORDER_DEVIATION:
            reason = f"pre-asymptotic (order {orders[0]:.2f}, median {median:.2f})"
            excluded.append({"h": hs[kept[0]], "reason": reason})
            kept = kept[1:]
        elif abs(orders[-1] - median) > ORDER_DEVIATION:
            reason = f"order breakdown (order {orders[-1]:.2f}, median {median:.2f})"
            excluded.append({"h": hs[kept[-1]], "reason": reason})
            kept = kept[:-1]
        else:
            break

    log_h = np.log([hs[i] for i in kept])
    log_e = np.log([es[i] for i in kept])
    slope = float(np.polyfit(log_h, log_e, 1)[0])

    positive = [i for i in range(len(points)) if es[i] > 0]
    pairwise = _pairwise_orders([hs[i] for i in positive], [es[i] for i in positive])
    if any(b < a - ORDER_DEVIATION for a, b in zip(pairwise[:-1], pairwise[1:])):
        logger.warning("pairwise orders are not monotone: %s", ", ".join(f"{q:.2f}" for q in pairwise))
    return OrderFit(hs=hs, errors=es, pairwise=pairwise, slope=slope, used=kept, excluded=excluded)


# ==================== Step sizes ====================

_OCTAVES = re.compile(r"^2\^(-?\d+)\s*\.\.\s*2\^(-?\d+)$")
_POWER = re.compile(r"^2\^(-?\d+)$")


def parse_step_sizes(text: str) -> List[float]:
    """
    Parse '2^-3..2^-8' (octave sweep, both ends included), '2^-6' or '0.1,0.05'.

    Raises:
        ValueError: unparseable text
    """
    text = text.strip()
    match = _OCTAVES.match(text)
    if match:
        a, b = int(match.group(1)), int(match.group(2))
        step = -1 if b < a else 1
        return [2.0 ** k for k in range(a, b + step, step)]
    values = []
    for item in text.split(","):
        item = item.strip()
        power = _POWER.match(item)
        try:
            values.append(2.0 ** int(power.group(1)) if power else float(item))
        except ValueError:
            raise ValueError(f"cannot parse step size '{item}' in '{text}'") from None
    if not values or any(not v > 0 for v in values):
        raise ValueError(f"step sizes must be positive: '{text}'")
    return values


# ==================== Studies ====================

@dataclass(frozen=True)
class ConvergenceStudy:
    """
    One method x step-size sweep on a benchmark problem.

    reference='computed' integrates with reference_method/reference_scheme at
    reference_h (and at 2 reference_h to estimate its accuracy floor).
    reference='auto' uses the exact solution when the benchmark has one and a
    computed reference otherwise; reference_h=None takes the per-benchmark
    step from REFERENCE_STEPS.
    """

    problem: str
    method: str
    scheme: str
    s: int
    hs: Tuple[float, ...]
    n: int = 128
    norm: Norm = "linf"
    alpha: float = 0.0
    reference: Literal["auto", "exact", "computed"] = "auto"
    reference_method: str = "erkc_c"
    reference_scheme: str = "gauss"
    reference_s: int = 3
    reference_h: Optional[float] = None
    source: str = "discrete"
    mesh_policy: str = "constrained_uniform"
    fp_tol: float = 1e-12
    fp_max_iter: int = 100
    global_error: bool = False
    floor_factor: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "method", normalize_method(self.method))
        object.__setattr__(self, "hs", tuple(float(h) for h in self.hs))
        if len(self.hs) == 0 or any(b >= a for a, b in zip(self.hs[:-1], self.hs[1:])):
            raise ValueError(f"step sizes must be strictly decreasing, got {self.hs}")
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm '{self.norm}'")
        if self.reference not in ("auto", "exact", "computed"):
            raise ValueError(f"reference must be 'auto', 'exact' or 'computed', got '{self.reference}'")
        if self.reference == "auto":
            resolved = "exact" if has_exact_solution(self.problem) else "computed"
            object.__setattr__(self, "reference", resolved)
        if self.reference_h is None:
            object.__setattr__(self, "reference_h", REFERENCE_STEPS.get(self.problem.lower(), DEFAULT_REFERENCE_H))
        if self.reference == "computed" and not self.reference_h < min(self.hs) / 4:
            raise ValueError(
                f"reference_h = {self.reference_h} must be below min step / 4 = {min(self.hs) / 4}"
            )

    def build_problem(self) -> ProblemSpec:
        kwargs = {"source": self.source} if self.problem in ("ex1", "ex4") else {}
        return get_problem(self.problem, self.n, **kwargs)

    def method_config(self) -> MethodConfig:
        return MethodConfig(
            method=self.method,
            scheme=scheme_from_name(self.scheme, self.s),
            fp_tol=self.fp_tol,
            fp_max_iter=self.fp_max_iter,
            track_global_error=self.global_error,
        )


def run_single(problem: ProblemSpec, config: MethodConfig, h: float, mesh_policy: str) -> Trajectory:
    """Integrate one problem on the mesh generated from base step h."""
    disc = compute_discontinuities(problem.delay, problem.T)
    mesh = build_mesh(disc, h, policy=mesh_policy)
    return integrate(problem, mesh, config)


def _reference_solution(study: ConvergenceStudy, problem: ProblemSpec) -> Tuple[np.ndarray, float]:
    """Final-time reference and its estimated accuracy in the study norm."""
    if study.reference == "exact":
        if not problem.has_exact:
            raise ValueError(f"problem {problem.label} has no exact solution, use a computed reference")
        return problem.exact(problem.T), 0.0
    config = MethodConfig(
        method=study.reference_method,
        scheme=scheme_from_name(study.reference_scheme, study.reference_s),
        fp_tol=study.fp_tol,
        fp_max_iter=study.fp_max_iter,
    )
    fine = run_single(problem, config, study.reference_h, study.mesh_policy).final
    coarse = run_single(problem, config, 2.0 * study.reference_h, study.mesh_policy).final
    # Richardson-style estimate, assuming order reference_s + 1
    floor = error_norm(coarse, fine, study.norm, problem.operator, study.alpha) / (2.0 ** (study.reference_s + 1) - 1.0)
    logger.info("computed reference at h=%.3e, estimated accuracy %.3e", study.reference_h, floor)
    return fine, floor


def run_study(study: ConvergenceStudy, max_workers: int = 1) -> Tuple[OrderFit, pd.DataFrame]:
    """
    Run every step size of a study and fit the observed order.

    Cells run in a thread pool; results are assembled in step-size order.

    Returns:
        (OrderFit, DataFrame with columns h, error, pairwise_order[, global_error], used)

    Raises:
        ERKCError: integration failure, message prefixed with the step size
    """
    problem = study.build_problem()
    config = study.method_config()
    reference, floor = _reference_solution(study, problem)

    def cell(h: float) -> Trajectory:
        try:
            return run_single(problem, config, h, study.mesh_policy)
        except ERKCError as exc:
            raise type(exc)(f"h = {h:g}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        trajectories = list(pool.map(cell, study.hs))

    errors = [
        error_norm(traj.final, reference, study.norm, problem.operator, study.alpha)
        for traj in trajectories
    ]
    fit = fit_order(list(zip(study.hs, errors)), floor=floor, floor_factor=study.floor_factor)

    pairwise = [float("nan")] * len(study.hs)
    positive = [i for i, e in enumerate(errors) if e > 0]
    for idx, order in zip(positive[1:], fit.pairwise):
        pairwise[idx] = order
    frame = pd.DataFrame({
        "h": list(study.hs),
        "error": errors,
        "pairwise_order": pairwise,
    })
    if study.global_error:
        frame["global_error"] = [traj.report["global_error"] for traj in trajectories]
    frame["used"] = [int(i in fit.used) for i in range(len(study.hs))]

    logger.info(
        "%s %s %s s=%d: fitted order %.3f over h in [%g, %g]",
        study.problem, study.method, study.scheme, study.s, fit.slope, *fit.window,
    )
    for item in fit.excluded:
        logger.info("excluded h=%g: %s", item["h"], item["reason"])
    return fit, frame


def write_study_csv(
    study: ConvergenceStudy,
    fit: OrderFit,
    frame: pd.DataFrame,
    out: Optional[Union[str, Path, TextIO]] = None,
    float_format: str = "%.17g"
) -> str:
    """
    Write the study table with a '#schema=1' header and a trailing slope line.

    Args:
        out: Path, open text stream, or None for stdout

    Returns:
        The CSV text
    """
    buffer = io.StringIO()
    buffer.write(
        f"#schema={CSV_SCHEMA} problem={study.problem} method={study.method} "
        f"scheme={study.scheme} s={study.s} norm={study.norm} n={study.n} reference={study.reference}\n"
    )
    frame.to_csv(buffer, index=False, float_format=float_format, lineterminator="\n")
    buffer.write(f"#slope={fit.slope:.6f} window={fit.window[0]:g}..{fit.window[1]:g}\n")
    text = buffer.getvalue()
    if out is None:
        sys.stdout.write(text)
    elif isinstance(out, (str, Path)):
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return text

"""
Problem Definitions Tool - delay-parabolic benchmark problems

Every problem has the form
    u'(t) + A u(t) = g(t, u(t), u(t - tau(t))),  t in (0, T],
    u(t) = history(t),                           t <= 0,
after spatial semidiscretisation on the operator grid.

Benchmarks:
- ex1: 1D Dirichlet, manufactured exact solution Psi(t) sin(x) sin(1-x),
       delayed argument t/2 - 1/2
- ex2: 2D Dirichlet, history e^{-t} x(1-x) y(1-y), no exact solution
- ex3: 1D Dirichlet, logistic-type g(t,v,w) = v(1-v) - w(1-w), no exact solution
- ex4: 1D periodic, manufactured exact solution Psi(t) sin(2 pi x),
       delayed argument t^2 - 1

Manufactured sources (ex1, ex4) come in two flavours:
- source="discrete" (default): the -u_xx term of the source uses the discrete
  operator applied to the sampled profile, so Psi(t) S(x_grid) solves the
  semidiscrete system exactly and measured errors are pure time errors.
- source="continuous": the analytic -u_xx, as in the PDE. The semidiscrete
  solution then differs from the exact one by O(h_x^2) (ex1) or round-off (ex4).
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Literal, Optional

import numpy as np

from .delay_mesh import DelaySpec
from .errors import UnknownProblem
from .spectral_operator import (
    DiagonalizableOperator,
    apply_operator,
    dirichlet_laplacian_1d,
    dirichlet_laplacian_2d,
    grid_points,
    periodic_laplacian_1d,
)

SourceMode = Literal["discrete", "continuous"]

E2 = math.exp(2.0)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """
    Semidiscrete delay-parabolic problem.

    nonlinearity(t, v, w) acts pointwise on the grid (v = u(t), w = u(t - tau(t))).
    history(t) and exact(t) return flat state vectors.
    """

    label: str
    operator: DiagonalizableOperator
    delay: DelaySpec
    T: float
    history: Callable[[float], np.ndarray] = field(repr=False)
    nonlinearity: Callable[[float, np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    exact: Optional[Callable[[float], np.ndarray]] = field(default=None, repr=False)
    description: str = ""

    def g(self, t: float, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return self.nonlinearity(t, v, w)

    @property
    def has_exact(self) -> bool:
        return self.exact is not None


# ==================== Shared time profile ====================

def psi(t: float) -> float:
    """
    Three-piece time profile of the manufactured solutions.

    e^{-t} for t <= 0, 1 + t e^{2t} on (0, 1],
    (1 + e^2) + 3 e^2 (t - 1) + (t - 1)^2 e^{3t} for t > 1.
    Continuous at 0 and 1; derivative jumps at 0, second derivative at 1.
    """
    if t <= 0.0:
        return math.exp(-t)
    if t <= 1.0:
        return 1.0 + t * math.exp(2.0 * t)
    return (1.0 + E2) + 3.0 * E2 * (t - 1.0) + (t - 1.0) ** 2 * math.exp(3.0 * t)


def dpsi(t: float) -> float:
    """Psi'(t); at the break points 0 and 1 the right-hand limit is returned."""
    if t < 0.0:
        return -math.exp(-t)
    if t < 1.0:
        return math.exp(2.0 * t) * (1.0 + 2.0 * t)
    return 3.0 * E2 + math.exp(3.0 * t) * (2.0 * (t - 1.0) + 3.0 * (t - 1.0) ** 2)


def _check_grid(n: int) -> None:
    if n < 2:
        raise ValueError(f"grid size must be >= 2, got {n}")


def _check_source(source: str) -> None:
    if source not in ("discrete", "continuous"):
        raise ValueError(f"source must be 'discrete' or 'continuous', got '{source}'")


def _half_delay(T: float) -> DelaySpec:
    # t - tau(t) = t/2 - 1/2
    return DelaySpec(tau=lambda t: (t + 1.0) / 2.0, tau0=0.5, history_start=-0.5, label="(t+1)/2")


# ==================== Benchmarks ====================

def example_1(n: int, source: SourceMode = "discrete") -> ProblemSpec:
    """
    1D Dirichlet problem with exact solution Psi(t) sin(x) sin(1-x) on [0, 3].

    g(t, v, w) = 1/(1 + v^2) + 1/(1 + w^2) + Phi(t, x).

    The analytic Phi, with -d^2/dx^2 applied to the exact solution, is
    source="continuous". The default source="discrete" replaces that term by
    A_h applied to the sampled solution, so the grid values solve the
    semidiscrete system exactly.

    Args:
        n: Interior grid points
        source: "discrete" or "continuous" manufactured source
    """
    _check_grid(n)
    _check_source(source)
    op = dirichlet_laplacian_1d(n)
    x = grid_points(op)
    profile = np.sin(x) * np.sin(1.0 - x)
    if source == "discrete":
        stiffness = apply_operator(op, profile)
    else:
        stiffness = 2.0 * np.cos(2.0 * x - 1.0)
    T = 3.0
    delay = _half_delay(T)

    def source_term(t: float) -> np.ndarray:
        u = psi(t) * profile
        u_delayed = psi(0.5 * t - 0.5) * profile
        return (
            dpsi(t) * profile + psi(t) * stiffness
            - 1.0 / (1.0 + u ** 2) - 1.0 / (1.0 + u_delayed ** 2)
        )

    def nonlinearity(t: float, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + v ** 2) + 1.0 / (1.0 + w ** 2) + source_term(t)

    def exact(t: float) -> np.ndarray:
        return psi(t) * profile

    return ProblemSpec(
        label="ex1",
        operator=op,
        delay=delay,
        T=T,
        history=exact,
        nonlinearity=nonlinearity,
        exact=exact,
        description=f"1D Dirichlet, manufactured solution ({source} source), n={n}",
    )


def example_2(n: int) -> ProblemSpec:
    """2D Dirichlet problem on [0, 1]^2 with history e^{-t} x(1-x) y(1-y), T = 3."""
    _check_grid(n)
    op = dirichlet_laplacian_2d(n)
    X, Y = grid_points(op)
    bump = X * (1.0 - X) * Y * (1.0 - Y)

    def history(t: float) -> np.ndarray:
        return math.exp(-t) * bump

    def nonlinearity(t: float, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + v ** 2) + 1.0 / (1.0 + w ** 2)

    return ProblemSpec(
        label="ex2",
        operator=op,
        delay=_half_delay(3.0),
        T=3.0,
        history=history,
        nonlinearity=nonlinearity,
        description=f"2D Dirichlet, no exact solution, n={n}x{n}",
    )


def example_3(n: int) -> ProblemSpec:
    """1D Dirichlet problem with g(t, v, w) = v(1-v) - w(1-w), history e^t x(1-x), T = 3."""
    _check_grid(n)
    op = dirichlet_laplacian_1d(n)
    x = grid_points(op)
    bump = x * (1.0 - x)

    def history(t: float) -> np.ndarray:
        return math.exp(t) * bump

    def nonlinearity(t: float, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return v * (1.0 - v) - w * (1.0 - w)

    return ProblemSpec(
        label="ex3",
        operator=op,
        delay=_half_delay(3.0),
        T=3.0,
        history=history,
        nonlinearity=nonlinearity,
        description=f"1D Dirichlet logistic delay problem, n={n}",
    )


def example_4(n: int, source: SourceMode = "discrete") -> ProblemSpec:
    """
    1D periodic problem with exact solution Psi(t) sin(2 pi x) on [0, 1.4].

    Delayed argument t^2 - 1 (tau(t) = t - t^2 + 1, history on [-1, 0]);
    g(t, v, w) = 1/(1 + v^2) + 2000/(1 + w^2) + Phi(t, x).

    source="continuous" is the analytic Phi; the default "discrete" uses A_h on
    the sampled solution as for example_1.
    """
    _check_grid(n)
    _check_source(source)
    op = periodic_laplacian_1d(n)
    x = grid_points(op)
    profile = np.sin(2.0 * np.pi * x)
    if source == "discrete":
        stiffness = apply_operator(op, profile)
    else:
        stiffness = 4.0 * np.pi ** 2 * profile
    T = 1.4
    # tau is concave, so its minimum on [0, T] sits at an endpoint
    tau0 = min(1.0, T - T * T + 1.0)
    delay = DelaySpec(tau=lambda t: t - t * t + 1.0, tau0=tau0, history_start=-1.0, label="t-t^2+1")

    def source_term(t: float) -> np.ndarray:
        u = psi(t) * profile
        u_delayed = psi(t * t - 1.0) * profile
        return (
            dpsi(t) * profile + psi(t) * stiffness
            - 1.0 / (1.0 + u ** 2) - 2000.0 / (1.0 + u_delayed ** 2)
        )

    def nonlinearity(t: float, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + v ** 2) + 2000.0 / (1.0 + w ** 2) + source_term(t)

    def exact(t: float) -> np.ndarray:
        return psi(t) * profile

    return ProblemSpec(
        label="ex4",
        operator=op,
        delay=delay,
        T=T,
        history=exact,
        nonlinearity=nonlinearity,
        exact=exact,
        description=f"1D periodic, manufactured solution ({source} source), n={n}",
    )


PROBLEMS: Dict[str, Callable[..., ProblemSpec]] = {
    "ex1": example_1,
    "ex2": example_2,
    "ex3": example_3,
    "ex4": example_4,
}


def get_problem(label: str, n: int, **kwargs) -> ProblemSpec:
    """
    Look up a benchmark by label ('ex1'..'ex4').

    Raises:
        UnknownProblem: label not registered
    """
    try:
        factory = PROBLEMS[label.lower()]
    except KeyError:
        raise UnknownProblem(f"unknown problem '{label}', expected one of {sorted(PROBLEMS)}") from None
    return factory(n, **kwargs)


# Benchmarks built with a closed-form solution
EXACT_SOLUTIONS = ("ex1", "ex4")


def has_exact_solution(label: str) -> bool:
    """True when the benchmark carries a closed-form solution (no problem is built)."""
    if label.lower() not in PROBLEMS:
        raise UnknownProblem(f"unknown problem '{label}', expected one of {sorted(PROBLEMS)}")
    return label.lower() in EXACT_SOLUTIONS

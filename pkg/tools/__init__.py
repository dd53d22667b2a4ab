"""
ERKC Solver - Tools

Numerical building blocks: phi-functions and collocation schemes,
diagonalizable operators, delay discontinuity meshes and benchmark problems.

tools.convergence_tool depends on the integrators and is imported directly.
"""

from .errors import ERKCError
from .phi_functions import (
    CollocationScheme,
    PhiSeries,
    check_order_conditions,
    gauss_scheme,
    make_scheme,
    phi,
    phi_series,
    quadrature_residuals,
    radau_scheme,
    scheme_from_name,
    weight_a,
    weight_b,
)
from .spectral_operator import (
    DiagonalizableOperator,
    apply_fractional_power,
    apply_operator,
    apply_phi,
    apply_semigroup,
    apply_weight,
    dirichlet_laplacian_1d,
    dirichlet_laplacian_2d,
    explicit_diagonal,
    periodic_laplacian_1d,
    weight_symbols,
)
from .delay_mesh import (
    DelaySpec,
    DiscontinuitySet,
    Mesh,
    build_mesh,
    compute_discontinuities,
    disc_table,
    locate,
)
from .problem_defs import ProblemSpec, example_1, example_2, example_3, example_4, get_problem, has_exact_solution

__all__ = [
    "ERKCError",
    "CollocationScheme",
    "PhiSeries",
    "check_order_conditions",
    "gauss_scheme",
    "make_scheme",
    "phi",
    "phi_series",
    "quadrature_residuals",
    "radau_scheme",
    "scheme_from_name",
    "weight_a",
    "weight_b",
    "DiagonalizableOperator",
    "apply_fractional_power",
    "apply_operator",
    "apply_phi",
    "apply_semigroup",
    "apply_weight",
    "dirichlet_laplacian_1d",
    "dirichlet_laplacian_2d",
    "explicit_diagonal",
    "periodic_laplacian_1d",
    "weight_symbols",
    "DelaySpec",
    "DiscontinuitySet",
    "Mesh",
    "build_mesh",
    "compute_discontinuities",
    "disc_table",
    "locate",
    "ProblemSpec",
    "example_1",
    "example_2",
    "example_3",
    "example_4",
    "get_problem",
    "has_exact_solution",
]

"""
ERKC Integrators

Time-stepping engine for the exponential collocation methods
(erkc_i, erkc_c, merkc_i).
"""

from .erkc_integrator import (
    METHODS,
    MethodConfig,
    StepRecord,
    Trajectory,
    integrate,
    normalize_method,
    step,
    verify_no_future_reference,
)

__all__ = [
    "METHODS",
    "MethodConfig",
    "StepRecord",
    "Trajectory",
    "integrate",
    "normalize_method",
    "step",
    "verify_no_future_reference",
]

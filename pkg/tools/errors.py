"""
Error types raised by the ERKC tools, services and integrators.

Every error derives from ERKCError so callers (and the CLI) can catch the
whole family at once. Report-style checks do not raise; they return a dict
with a "status" key instead.
"""


class ERKCError(Exception):
    """Base class for all errors raised by this package."""


# ==================== Collocation schemes ====================

class ConfluentNodes(ERKCError, ValueError):
    """Two collocation nodes coincide."""


class NodeOutOfRange(ERKCError, ValueError):
    """A collocation node lies outside [0, 1]."""


class StageIndexError(ERKCError, IndexError):
    """Stage index outside 1..s."""


# ==================== Operators ====================

class DimensionError(ERKCError, ValueError):
    """State vector layout does not match the operator grid."""


class ZeroEigenvalueNegativePower(ERKCError, ValueError):
    """Negative fractional power requested for an operator with a zero eigenvalue."""


# ==================== Delay and mesh ====================

class NonmonotoneDeviatedArgument(ERKCError, ValueError):
    """t - tau(t) is not strictly increasing on the horizon."""


class DelayBoundViolation(ERKCError, ValueError):
    """tau(t) drops below the declared lower bound tau0."""


class BracketFailure(ERKCError):
    """The deviated argument cannot bracket the next discontinuity point."""


class StepExceedsTauZero(ERKCError, ValueError):
    """A step is longer than tau0, so stages would reference the current interval."""


class EmptySegment(ERKCError, ValueError):
    """Merging nodes collapsed a whole segment between discontinuity points."""


class OutOfDomain(ERKCError, ValueError):
    """Time outside [history_start, T]."""


# ==================== History ====================

class FutureEvaluation(ERKCError):
    """Evaluation requested beyond the last completed interval."""


class StencilUnavailable(ERKCError):
    """No s+2 node stencil fits inside the smoothness segment."""


# ==================== Integration and harness ====================

class FixedPointDivergence(ERKCError):
    """Stage fixed-point iteration did not converge within fp_max_iter sweeps."""


class InsufficientData(ERKCError, ValueError):
    """Fewer than three usable (h, error) points for an order fit."""


class UnknownProblem(ERKCError, KeyError):
    """Problem label not registered."""


class ConfigError(ERKCError, ValueError):
    """Invalid configuration key or value."""

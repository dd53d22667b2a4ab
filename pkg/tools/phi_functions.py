"""
Phi Functions Tool - scalar phi-functions and exponential collocation schemes

This tool provides:
- phi(): the entire functions phi_j(z) = int_0^1 e^{(1-x)z} x^{j-1}/(j-1)! dx
- CollocationScheme + constructors for Gauss, Radau IIA and custom nodes
- weight_b() / weight_a(): the exponential collocation weights b_i(theta; z)
  and a_ij(z) = b_j(c_i; z) written as linear combinations of phi_j
- check_order_conditions() and quadrature_residuals() for scheme diagnostics

Evaluation of phi_j:
    The closed recurrence phi_{k+1}(z) = (phi_k(z) - 1/k!)/z subtracts two
    numbers of size ~1/k! whose difference is ~|z|/(k+1)!, so every upward
    step loses about log10((k+1)/|z|) digits when |z| < k+1. For
    |z| < max(0.5, j) we therefore sum the Taylor series
    sum_m z^m/(m+j)! directly (no cancellation beyond the mild e^{|z|}
    factor of the alternating case), and only above that radius run the
    recurrence upwards from phi_1(z) = expm1(z)/z.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfluentNodes, NodeOutOfRange, StageIndexError

Scalar = Union[float, complex]
ArrayLike = Union[Scalar, np.ndarray]

# Below max(PHI_TAYLOR_RADIUS, j) the Taylor series is used for phi_j
PHI_TAYLOR_RADIUS = 0.5
PHI_TAYLOR_RTOL = 1e-18
PHI_TAYLOR_MAX_TERMS = 200

# A quadrature condition counts as satisfied below this residual
QUADRATURE_TOL = 1e-10


# ==================== phi-functions ====================

def _phi_taylor(j: int, z: np.ndarray) -> np.ndarray:
    term = np.full(z.shape, 1.0 / math.factorial(j), dtype=z.dtype)
    total = term.copy()
    for m in range(1, PHI_TAYLOR_MAX_TERMS):
        term = term * z / (m + j)
        total = total + term
        if np.all(np.abs(term) <= PHI_TAYLOR_RTOL * np.abs(total)):
            break
    return total


def _phi_recurrence(j: int, z: np.ndarray) -> np.ndarray:
    value = np.expm1(z) / z
    for k in range(1, j):
        value = (value - 1.0 / math.factorial(k)) / z
    return value


def phi(j: int, z: ArrayLike) -> ArrayLike:
    """
    Evaluate phi_j(z) to near machine precision.

    phi_0(z) = e^z, phi_j(0) = 1/j!. Works elementwise on arrays and keeps
    complex arguments complex.

    Args:
        j: Index, j >= 0
        z: Real or complex scalar or array

    Returns:
        phi_j(z) with the shape of z (a Python scalar for scalar input)
    """
    if j < 0:
        raise ValueError(f"phi index must be >= 0, got {j}")

    scalar_input = np.ndim(z) == 0
    z_arr = np.atleast_1d(np.asarray(z))
    if not np.iscomplexobj(z_arr):
        z_arr = z_arr.astype(float)

    if j == 0:
        out = np.exp(z_arr)
    else:
        out = np.empty_like(z_arr)
        small = np.abs(z_arr) < max(PHI_TAYLOR_RADIUS, float(j))
        if np.any(small):
            out[small] = _phi_taylor(j, z_arr[small])
        if np.any(~small):
            out[~small] = _phi_recurrence(j, z_arr[~small])

    if scalar_input:
        return out[0].item()
    return out


@dataclass(frozen=True)
class PhiSeries:
    """phi_1(z), ..., phi_J(z) for a single argument z."""

    max_index: int
    z: Scalar
    values: Tuple[Scalar, ...]

    def __getitem__(self, j: int) -> Scalar:
        if not 1 <= j <= self.max_index:
            raise IndexError(f"phi index {j} outside 1..{self.max_index}")
        return self.values[j - 1]


def phi_series(max_index: int, z: Scalar) -> PhiSeries:
    """Return phi_1(z) .. phi_J(z) bundled as a PhiSeries."""
    values = tuple(phi(j, z) for j in range(1, max_index + 1))
    return PhiSeries(max_index=max_index, z=z, values=values)


# ==================== Collocation schemes ====================

@dataclass(frozen=True, eq=False)
class CollocationScheme:
    """
    Exponential collocation scheme defined by distinct nodes c_1..c_s in [0, 1].

    p[i][j] holds the monomial coefficients of the Lagrange basis:
    l_i(x) = sum_j p[i][j] x^j (0-based j, so p[i][0] is the constant term).
    """

    c: Tuple[float, ...]
    p: np.ndarray = field(repr=False)
    quadrature_order: int
    name: str = "custom"

    @property
    def s(self) -> int:
        return len(self.c)

    @property
    def nodes(self) -> np.ndarray:
        return np.asarray(self.c, dtype=float)

    def lagrange(self, i: int, xi: ArrayLike) -> ArrayLike:
        """Evaluate l_i at xi (i is 1-based)."""
        _check_stage(self, i)
        return P.polyval(xi, self.p[i - 1])

    def b_at_zero(self) -> np.ndarray:
        """b_i(0) = int_0^1 l_i(x) dx for every stage."""
        powers = np.arange(1, self.s + 1, dtype=float)
        return self.p @ (1.0 / powers)


def _lagrange_coefficients(nodes: np.ndarray) -> np.ndarray:
    s = len(nodes)
    p = np.empty((s, s))
    for i in range(s):
        others = np.delete(nodes, i)
        numerator = P.polyfromroots(others) if s > 1 else np.array([1.0])
        p[i] = numerator / np.prod(nodes[i] - others)
    return p


def quadrature_residuals(scheme: CollocationScheme, kmax: int = None) -> List[float]:
    """
    Residuals of sum_i b_i(0) c_i^{k-1}/(k-1)! - 1/k! for k = 1..kmax.

    Args:
        scheme: Collocation scheme
        kmax: Highest k checked (default 2s + 2)

    Returns:
        List of absolute residuals, index 0 for k = 1
    """
    kmax = kmax or 2 * scheme.s + 2
    b0 = scheme.b_at_zero()
    c = scheme.nodes
    residuals = []
    for k in range(1, kmax + 1):
        lhs = float(np.sum(b0 * c ** (k - 1))) / math.factorial(k - 1)
        residuals.append(abs(lhs - 1.0 / math.factorial(k)))
    return residuals


def _detect_quadrature_order(residuals: Sequence[float]) -> int:
    order = 0
    for r in residuals:
        if r >= QUADRATURE_TOL:
            break
        order += 1
    return order


def make_scheme(nodes: Sequence[float], name: str = "custom") -> CollocationScheme:
    """
    Build a collocation scheme from explicit nodes.

    Args:
        nodes: Pairwise distinct collocation parameters in [0, 1]
        name: Label used in reports

    Returns:
        CollocationScheme with Lagrange monomial coefficients and quadrature order

    Raises:
        NodeOutOfRange: a node outside [0, 1] (or no nodes at all)
        ConfluentNodes: repeated nodes
    """
    c = np.asarray([float(x) for x in nodes])
    if c.size == 0:
        raise NodeOutOfRange("at least one collocation node is required")
    if np.any(c < 0.0) or np.any(c > 1.0):
        raise NodeOutOfRange(f"collocation nodes must lie in [0, 1], got {c.tolist()}")
    if len(np.unique(c)) != len(c):
        raise ConfluentNodes(f"collocation nodes must be distinct, got {c.tolist()}")

    p = _lagrange_coefficients(c)
    p.setflags(write=False)
    draft = CollocationScheme(c=tuple(c.tolist()), p=p, quadrature_order=0, name=name)
    order = _detect_quadrature_order(quadrature_residuals(draft))
    return CollocationScheme(c=draft.c, p=p, quadrature_order=order, name=name)


_SQ3 = math.sqrt(3.0)
_SQ6 = math.sqrt(6.0)
_SQ15 = math.sqrt(15.0)

GAUSS_NODES: Dict[int, Tuple[float, ...]] = {
    1: (0.5,),
    2: (0.5 - _SQ3 / 6.0, 0.5 + _SQ3 / 6.0),
    3: (0.5 - _SQ15 / 10.0, 0.5, 0.5 + _SQ15 / 10.0),
}

RADAU_NODES: Dict[int, Tuple[float, ...]] = {
    1: (1.0,),
    2: (1.0 / 3.0, 1.0),
    3: ((4.0 - _SQ6) / 10.0, (4.0 + _SQ6) / 10.0, 1.0),
}


def gauss_scheme(s: int) -> CollocationScheme:
    """Gauss-Legendre nodes on [0, 1] for s = 1, 2, 3."""
    if s not in GAUSS_NODES:
        raise ValueError(f"Gauss scheme available for s in {sorted(GAUSS_NODES)}, got {s}")
    return make_scheme(GAUSS_NODES[s], name=f"gauss{s}")


def radau_scheme(s: int) -> CollocationScheme:
    """Radau IIA nodes (right endpoint included) for s = 1, 2, 3."""
    if s not in RADAU_NODES:
        raise ValueError(f"Radau IIA scheme available for s in {sorted(RADAU_NODES)}, got {s}")
    return make_scheme(RADAU_NODES[s], name=f"radau{s}")


def scheme_from_name(label: str, s: int = None) -> CollocationScheme:
    """
    Resolve 'gauss', 'radau' or 'custom:c1,c2,...' into a scheme.

    Examples:
        scheme_from_name("radau", 2)
        scheme_from_name("custom:0.25,0.75")
    """
    label = label.strip().lower()
    if label.startswith("custom:"):
        nodes = [float(x) for x in label.split(":", 1)[1].split(",") if x.strip()]
        return make_scheme(nodes, name=label)
    if s is None:
        raise ValueError(f"stage count s is required for scheme '{label}'")
    if label == "gauss":
        return gauss_scheme(s)
    if label == "radau":
        return radau_scheme(s)
    raise ValueError(f"unknown scheme '{label}' (expected gauss, radau or custom:...)")


# ==================== Weights ====================

def _check_stage(scheme: CollocationScheme, i: int) -> None:
    if not 1 <= i <= scheme.s:
        raise StageIndexError(f"stage index {i} outside 1..{scheme.s}")


def weight_b(scheme: CollocationScheme, i: int, theta: float, z: ArrayLike) -> ArrayLike:
    """
    b_i(theta; z) = sum_j p[i][j] (j-1)! theta^j phi_j(theta z).

    theta = 1 gives the step weight b_i(z); theta = c_k gives a_ki(z).

    Args:
        scheme: Collocation scheme
        i: Stage index (1-based)
        theta: Position inside the step, 0 <= theta <= 1
        z: Scalar or array argument (h times an eigenvalue of -A)

    Returns:
        b_i(theta; z), same shape as z
    """
    _check_stage(scheme, i)
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")

    tz = theta * np.asarray(z) if np.ndim(z) else theta * z
    total = 0.0
    for j in range(1, scheme.s + 1):
        coeff = scheme.p[i - 1][j - 1]
        if coeff == 0.0:
            continue
        total = total + coeff * math.factorial(j - 1) * theta ** j * phi(j, tz)
    if np.ndim(z) and np.ndim(total) == 0:
        total = np.full(np.shape(z), total)
    return total


def weight_a(scheme: CollocationScheme, i: int, j: int, z: ArrayLike) -> ArrayLike:
    """Internal coefficient a_ij(z) = b_j(c_i; z)."""
    _check_stage(scheme, i)
    return weight_b(scheme, j, scheme.c[i - 1], z)


def check_order_conditions(
    scheme: CollocationScheme,
    theta: float,
    z: Scalar,
    tol: float = 1e-11
) -> Dict:
    """
    Verify sum_i b_i(theta; z) c_i^{j-1}/(j-1)! = theta^j phi_j(theta z), j = 1..s.

    Residuals are relative to max(1, |theta^j phi_j(theta z)|).

    Returns:
        Dictionary with validation results:
        {
            "status": "success" | "error",
            "passed": bool,
            "residuals": [r_1, ..., r_s],
            "max_residual": float,
            "message": str
        }
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")

    weights = [weight_b(scheme, i, theta, z) for i in range(1, scheme.s + 1)]
    residuals = []
    for j in range(1, scheme.s + 1):
        lhs = sum(
            w * scheme.c[i] ** (j - 1) for i, w in enumerate(weights)
        ) / math.factorial(j - 1)
        rhs = theta ** j * phi(j, theta * z)
        residuals.append(float(abs(lhs - rhs) / max(1.0, abs(rhs))))

    max_residual = max(residuals)
    passed = max_residual <= tol
    return {
        "status": "success" if passed else "error",
        "passed": passed,
        "residuals": residuals,
        "max_residual": max_residual,
        "message": (
            f"order conditions hold for j = 1..{scheme.s} (max residual {max_residual:.2e})"
            if passed else
            f"order conditions violated: max residual {max_residual:.2e} > {tol:.1e}"
        ),
    }

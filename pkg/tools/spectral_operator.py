"""
Spectral Operator Tool - diagonalizable model operators A and their functions

Operators supported:
- dirichlet_laplacian_1d: second-order finite differences on n interior points
  of [0, 1], diagonalised by the orthonormal type-I discrete sine transform
- dirichlet_laplacian_2d: tensor product of the 1D operator on [0, 1]^2,
  row-major flattening (x index slowest)
- periodic_laplacian_1d: pseudospectral Laplacian on n equispaced points of
  [0, 1), diagonalised by the FFT
- explicit_diagonal: A = diag(eigenvalues), identity transform

Every function of A acts as inverse(m(lambda) * forward(v)). State vectors
are flat numpy arrays whose length equals the operator DOF count.
"""

from dataclasses import dataclass, field
from typing import Literal, Sequence, Tuple, Union

import numpy as np
from scipy import fft

from .errors import DimensionError, ZeroEigenvalueNegativePower
from .phi_functions import CollocationScheme, phi, weight_b

OperatorKind = Literal[
    "dirichlet_laplacian_1d",
    "dirichlet_laplacian_2d",
    "periodic_laplacian_1d",
    "explicit_diagonal",
]

# Flat spatial degrees of freedom on the operator grid
StateVector = np.ndarray


@dataclass(frozen=True, eq=False)
class DiagonalizableOperator:
    """
    Nonnegative diagonalizable operator stored by its eigenvalues.

    eigenvalues are flat, ordered like the flattened output of forward().
    shape is the grid shape used by the transform (n,) or (n, n).
    """

    kind: OperatorKind
    shape: Tuple[int, ...]
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def dof(self) -> int:
        return int(np.prod(self.shape))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    # ---------- transforms (accept stacked (..., dof) arrays) ----------

    def _grid_view(self, v: np.ndarray) -> np.ndarray:
        return v.reshape(v.shape[:-1] + self.shape)

    def forward(self, v: np.ndarray) -> np.ndarray:
        """Coefficients of v in the eigenbasis, flattened along the last axis."""
        if self.kind == "explicit_diagonal":
            return np.array(v, copy=True)
        if self.kind == "periodic_laplacian_1d":
            return fft.fft(v, axis=-1)
        grid = self._grid_view(v)
        axes = tuple(range(-self.ndim, 0))
        coeffs = fft.dstn(grid, type=1, axes=axes, norm="ortho")
        return coeffs.reshape(v.shape)

    def inverse(self, coeffs: np.ndarray, real: bool = True) -> np.ndarray:
        """Map eigenbasis coefficients back to grid values."""
        if self.kind == "explicit_diagonal":
            out = np.array(coeffs, copy=True)
        elif self.kind == "periodic_laplacian_1d":
            out = fft.ifft(coeffs, axis=-1)
        else:
            grid = self._grid_view(coeffs)
            axes = tuple(range(-self.ndim, 0))
            out = fft.idstn(grid, type=1, axes=axes, norm="ortho").reshape(coeffs.shape)
        if real and np.iscomplexobj(out):
            return out.real
        return out

    def apply_symbol(self, symbol: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Apply the function of A whose eigenvalue multipliers are `symbol`."""
        coeffs = self.forward(v)
        return self.inverse(symbol * coeffs, real=not np.iscomplexobj(v))


# ==================== Constructors ====================

def _dirichlet_eigenvalues(n: int) -> np.ndarray:
    hx = 1.0 / (n + 1)
    k = np.arange(1, n + 1)
    return 4.0 / hx ** 2 * np.sin(k * np.pi / (2 * (n + 1))) ** 2


def dirichlet_laplacian_1d(n: int) -> DiagonalizableOperator:
    """-d^2/dx^2 on [0, 1] with homogeneous Dirichlet data, n interior points."""
    if n < 1:
        raise ValueError(f"grid size must be >= 1, got {n}")
    lam = _dirichlet_eigenvalues(n)
    lam.setflags(write=False)
    return DiagonalizableOperator("dirichlet_laplacian_1d", (n,), lam)


def dirichlet_laplacian_2d(n: int) -> DiagonalizableOperator:
    """-Laplacian on [0, 1]^2, n interior points per direction."""
    if n < 1:
        raise ValueError(f"grid size must be >= 1, got {n}")
    lam1 = _dirichlet_eigenvalues(n)
    lam = (lam1[:, None] + lam1[None, :]).ravel()
    lam.setflags(write=False)
    return DiagonalizableOperator("dirichlet_laplacian_2d", (n, n), lam)


def periodic_laplacian_1d(n: int) -> DiagonalizableOperator:
    """Pseudospectral -d^2/dx^2 on the unit torus with n modes."""
    if n < 1:
        raise ValueError(f"grid size must be >= 1, got {n}")
    k = fft.fftfreq(n, d=1.0 / n)
    lam = (2.0 * np.pi * k) ** 2
    lam.setflags(write=False)
    return DiagonalizableOperator("periodic_laplacian_1d", (n,), lam)


def explicit_diagonal(eigenvalues: Sequence[float]) -> DiagonalizableOperator:
    """A = diag(eigenvalues); eigenvalues must be real and >= 0."""
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    if lam.size == 0 or np.any(lam < 0):
        raise ValueError("explicit_diagonal needs a nonempty list of eigenvalues >= 0")
    lam.setflags(write=False)
    return DiagonalizableOperator("explicit_diagonal", (lam.size,), lam)


def mesh_width(op: DiagonalizableOperator) -> float:
    """Spatial step h_x per dimension (1/(n+1) Dirichlet, 1/n periodic, 1 diagonal)."""
    n = op.shape[0]
    if op.kind.startswith("dirichlet"):
        return 1.0 / (n + 1)
    if op.kind == "periodic_laplacian_1d":
        return 1.0 / n
    return 1.0


def grid_points(op: DiagonalizableOperator) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """
    Grid coordinates matching the flat state layout.

    Returns x for 1D operators and (x, y) flattened row-major for 2D.
    """
    n = op.shape[0]
    if op.kind == "dirichlet_laplacian_1d":
        return np.arange(1, n + 1) / (n + 1)
    if op.kind == "dirichlet_laplacian_2d":
        x1 = np.arange(1, n + 1) / (n + 1)
        X, Y = np.meshgrid(x1, x1, indexing="ij")
        return X.ravel(), Y.ravel()
    if op.kind == "periodic_laplacian_1d":
        return np.arange(n) / n
    return np.arange(n, dtype=float)


# ==================== Operator functions ====================

def _check_layout(op: DiagonalizableOperator, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] != op.dof:
        raise DimensionError(
            f"state vector of shape {v.shape} does not match operator with {op.dof} DOF"
        )
    return v


def apply_semigroup(op: DiagonalizableOperator, t: float, v: StateVector) -> StateVector:
    """e^{-tA} v."""
    if t < 0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")
    v = _check_layout(op, v)
    if t == 0:
        return np.array(v, copy=True)
    return op.apply_symbol(np.exp(-t * op.eigenvalues), v)


def apply_phi(op: DiagonalizableOperator, j: int, t: float, v: StateVector) -> StateVector:
    """phi_j(-tA) v."""
    if j < 1:
        raise ValueError(f"apply_phi needs j >= 1, got {j}")
    if t < 0:
        raise ValueError(f"phi time must be >= 0, got {t}")
    v = _check_layout(op, v)
    return op.apply_symbol(phi(j, -t * op.eigenvalues), v)


def apply_weight(
    op: DiagonalizableOperator,
    scheme: CollocationScheme,
    i: int,
    theta: float,
    h: float,
    v: StateVector
) -> StateVector:
    """b_i(theta; -hA) v = sum_j p[i][j] (j-1)! theta^j phi_j(-theta h A) v."""
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    v = _check_layout(op, v)
    return op.apply_symbol(weight_b(scheme, i, theta, -h * op.eigenvalues), v)


def apply_fractional_power(op: DiagonalizableOperator, gamma: float, v: StateVector) -> StateVector:
    """A^gamma v for gamma in [-1, 1]."""
    if not -1.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [-1, 1], got {gamma}")
    v = _check_layout(op, v)
    if gamma == 0:
        return np.array(v, copy=True)
    if gamma < 0 and np.any(op.eigenvalues == 0):
        raise ZeroEigenvalueNegativePower(
            f"A^{gamma} undefined: operator {op.kind} has a zero eigenvalue"
        )
    return op.apply_symbol(op.eigenvalues ** gamma, v)


def apply_operator(op: DiagonalizableOperator, v: StateVector) -> StateVector:
    """A v."""
    return apply_fractional_power(op, 1.0, v)


# ==================== Step symbols ====================

@dataclass(frozen=True, eq=False)
class StepSymbols:
    """
    Eigenvalue multipliers for one step size h.

    exp_stage[i] = e^{-c_i h lambda}, exp_step = e^{-h lambda},
    a[i, j] = a_ij(-h lambda), b[i] = b_i(-h lambda).
    """

    h: float
    exp_stage: np.ndarray
    exp_step: np.ndarray
    a: np.ndarray
    b: np.ndarray


def weight_symbols(op: DiagonalizableOperator, scheme: CollocationScheme, h: float) -> StepSymbols:
    """Precompute all multipliers one ERKC step of size h needs."""
    z = -h * op.eigenvalues
    s = scheme.s
    exp_stage = np.stack([np.exp(c * z) for c in scheme.c])
    a = np.empty((s, s, op.dof))
    for i in range(s):
        for j in range(s):
            a[i, j] = weight_b(scheme, j + 1, scheme.c[i], z)
    b = np.stack([weight_b(scheme, i + 1, 1.0, z) for i in range(s)])
    return StepSymbols(h=h, exp_stage=exp_stage, exp_step=np.exp(z), a=a, b=b)


def smoothing_constant(
    op: DiagonalizableOperator,
    scheme: CollocationScheme,
    gamma: float,
    thetas: Sequence[float],
    hs: Sequence[float]
) -> float:
    """
    max over i, theta, h, k of (theta h lambda_k)^gamma |b_i(theta; -h lambda_k)|.

    Surrogate for the operator norm of (theta h A)^gamma b_i(theta; -hA).
    """
    worst = 0.0
    for h in hs:
        z = -h * op.eigenvalues
        for theta in thetas:
            scale = (theta * h * op.eigenvalues) ** gamma
            for i in range(1, scheme.s + 1):
                values = scale * np.abs(weight_b(scheme, i, theta, z))
                worst = max(worst, float(np.max(values)))
    return worst


def dense_matrix(op: DiagonalizableOperator) -> np.ndarray:
    """Dense matrix of A (small operators only; used for cross-checks)."""
    if op.dof > 4096:
        raise ValueError(f"refusing to build a dense {op.dof}x{op.dof} matrix")
    columns = [apply_operator(op, e) for e in np.eye(op.dof)]
    return np.stack(columns, axis=1)


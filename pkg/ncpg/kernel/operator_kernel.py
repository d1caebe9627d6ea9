"""
Dense complex-matrix numerics used by every other module.

Operators are plain complex numpy arrays. Positive operators (densities and
their powers) are wrapped in PositiveOperator, which diagonalizes once at
construction and answers every fractional-power request from that cache.
"""

import logging
import os
import sys
from typing import Callable, Optional

import numpy as np
from scipy import linalg

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from utils.error_handlers import InvalidInputError, SingularityError, ensure_finite

logger = logging.getLogger(__name__)

DenseOperator = np.ndarray

HERMITIAN_TOL = 1e-12
SINGULAR_TOL = 1e-14
# Exponents produced by 1/r = 1/p + 1/q land a rounding error below 1.
EXPONENT_SLACK = 1e-12


def as_operator(a, what: str = "operator") -> DenseOperator:
    """
    Validates a square finite matrix and returns it as a complex array.

    Args:
        a: Anything convertible to a 2-D array.
        what: Name used in error messages.

    Returns:
        A complex128 copy-free view where possible.
    """
    array = ensure_finite(a, what)
    if array.ndim != 2 or array.shape[0] != array.shape[1] or array.shape[0] < 1:
        raise InvalidInputError(f"{what} must be a non-empty square matrix, got shape {array.shape}")
    return array.astype(np.complex128, copy=False)


def hermitize(a, what: str = "operator", tol: float = HERMITIAN_TOL) -> DenseOperator:
    """
    Returns (a + a*)/2 when the Hermiticity defect of `a` is negligible.

    Args:
        a: Square matrix.
        what: Name used in error messages.
        tol: Allowed defect relative to the operator norm.

    Returns:
        The symmetrized matrix.
    """
    a = as_operator(a, what)
    scale = max(1.0, float(np.abs(a).max()))
    defect = float(np.abs(a - a.conj().T).max())
    if defect > tol * scale:
        raise InvalidInputError(f"{what} is not Hermitian (defect {defect:.3e})")
    return (a + a.conj().T) / 2


def schatten_norm(a, p: float) -> float:
    """
    Schatten p-norm (sum of p-th powers of singular values)^(1/p).

    Args:
        a: Square or rectangular matrix with finite entries.
        p: Exponent in [1, inf].

    Returns:
        The norm; the largest singular value for p = inf.
    """
    a = ensure_finite(a, "operator")
    if p < 1.0 - EXPONENT_SLACK:
        raise InvalidInputError(f"Schatten exponent must be at least 1, got {p}")
    if p == 2:
        return float(np.sqrt(np.sum(np.abs(a) ** 2)))
    sigma = linalg.svdvals(a)
    if np.isinf(p):
        return float(sigma.max(initial=0.0))
    return float(np.sum(sigma ** p) ** (1.0 / p))


def trace(a) -> complex:
    return complex(np.trace(a))


def commutator(a, b) -> DenseOperator:
    return a @ b - b @ a


def anticommutator(a, b) -> DenseOperator:
    return a @ b + b @ a


def op_norm(a) -> float:
    return schatten_norm(a, np.inf)


class PositiveOperator:
    """
    A strictly positive Hermitian matrix with a cached eigendecomposition.

    Diagonal inputs (every reference density of the quasi-free models) keep a
    diagonal fast path so that sandwiches W^a x W^b cost O(dim^2).
    """

    def __init__(self, matrix, what: str = "density"):
        matrix = hermitize(matrix, what)
        self.dim = matrix.shape[0]
        off_diagonal = matrix - np.diag(np.diag(matrix))
        self.is_diagonal = not np.any(off_diagonal)
        if self.is_diagonal:
            self.eigenvalues = np.real(np.diag(matrix)).copy()
            self.eigenvectors = None
        else:
            self.eigenvalues, self.eigenvectors = linalg.eigh(matrix)
        lam_max = float(self.eigenvalues.max())
        lam_min = float(self.eigenvalues.min())
        if lam_max <= 0 or lam_min < SINGULAR_TOL * lam_max:
            raise SingularityError(
                f"{what} is not strictly positive (min eigenvalue {lam_min:.3e}, max {lam_max:.3e})"
            )
        self.matrix = matrix
        self.eigenvalues.setflags(write=False)

    @classmethod
    def from_diagonal(cls, weights) -> "PositiveOperator":
        return cls(np.diag(np.asarray(weights, dtype=np.complex128)))

    def weights(self, z: complex = 1.0) -> np.ndarray:
        """Eigenvalues raised to the (possibly complex) power z."""
        return self.eigenvalues.astype(np.complex128) ** z

    def power(self, z: complex) -> DenseOperator:
        """W^z; W^0 is the identity."""
        if z == 0:
            return np.eye(self.dim, dtype=np.complex128)
        if self.is_diagonal:
            return np.diag(self.weights(z))
        v = self.eigenvectors
        return (v * self.weights(z)) @ v.conj().T

    def sandwich(self, x, left: complex, right: complex) -> DenseOperator:
        """Computes W^left · x · W^right."""
        if self.is_diagonal:
            return self.weights(left)[:, None] * x * self.weights(right)[None, :]
        return self.power(left) @ x @ self.power(right)

    def trace_with(self, x) -> complex:
        """trace(W x)."""
        if self.is_diagonal:
            return complex(np.dot(self.eigenvalues, np.diag(x)))
        return complex(np.trace(self.matrix @ x))


def frac_power(w: PositiveOperator, z: float) -> DenseOperator:
    """
    Fractional power of a strictly positive operator.

    Args:
        w: The positive operator.
        z: Real exponent.

    Returns:
        W^z computed from the cached eigendecomposition.
    """
    return w.power(z)


def matrix_function(a, f: Callable[[np.ndarray], np.ndarray]) -> DenseOperator:
    """
    Applies a scalar function to a Hermitian matrix through its eigenbasis.

    Args:
        a: Hermitian matrix (defect up to 1e-12 is symmetrized away).
        f: Vectorized map from real eigenvalues to complex values.

    Returns:
        f(a).
    """
    a = hermitize(a)
    eigenvalues, eigenvectors = linalg.eigh(a)
    values = np.asarray(f(eigenvalues), dtype=np.complex128)
    return (eigenvectors * values) @ eigenvectors.conj().T


def psd_sqrt(a, tol: float = 1e-10) -> DenseOperator:
    """
    Square root of a positive semidefinite matrix.

    Eigenvalues down to -tol·max are treated as rounding noise and clipped.
    """
    a = hermitize(a, "PSD operand", tol=1e-9)
    eigenvalues, eigenvectors = linalg.eigh(a)
    floor = -tol * max(1.0, float(np.abs(eigenvalues).max(initial=0.0)))
    if eigenvalues.min(initial=0.0) < floor:
        raise InvalidInputError(f"operand is not positive semidefinite (min eigenvalue {eigenvalues.min():.3e})")
    return (eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ eigenvectors.conj().T


def is_psd(a, tol: float = 1e-10) -> bool:
    """True when the Hermitian part of `a` has no eigenvalue below -tol·scale."""
    a = as_operator(a)
    h = (a + a.conj().T) / 2
    eigenvalues = linalg.eigvalsh(h)
    scale = max(1.0, float(np.abs(eigenvalues).max(initial=0.0)))
    return bool(eigenvalues.min() >= -tol * scale)


def random_operator(rng: np.random.Generator, dim: int, hermitian: bool = False) -> DenseOperator:
    """Complex Gaussian matrix, optionally symmetrized."""
    a = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2 * dim)
    if hermitian:
        a = (a + a.conj().T) / 2
    return a


def random_unitary(rng: np.random.Generator, dim: int) -> DenseOperator:
    """Haar-ish unitary from the QR decomposition of a complex Gaussian matrix."""
    q, r = linalg.qr(random_operator(rng, dim))
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases[None, :]


def relative_defect(a, b, scale: Optional[float] = None) -> float:
    """max|a - b| divided by max(1, scale or max|b|)."""
    a = np.asarray(a)
    b = np.asarray(b)
    ref = scale if scale is not None else float(np.abs(b).max(initial=0.0))
    return float(np.abs(a - b).max(initial=0.0)) / max(1.0, ref)

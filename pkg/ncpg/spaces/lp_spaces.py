"""
Haagerup L^p and twisted 𝕃^p norms in the density-matrix realization.

An element x of the algebra sits in L^p as T_τ^{(p)}(x) = W^{1/2p+τ} x W^{1/2p-τ};
the twisted norm is the supremum of the Schatten p-norms of these sandwiches
over |τ| ≤ 1 - 1/2p. The supremum is taken at the endpoints, with an interior
grid kept as a guard against a non-log-convex profile.
"""

import logging
import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import hermitize, schatten_norm
from models.araki_wyss import QuasiFreeModel, state
from utils.error_handlers import InvalidInputError, require

logger = logging.getLogger(__name__)

TAU_GRID_POINTS = 9
GUARD_TOL = 1e-9


def tau_limit(p: float) -> float:
    return 1.0 if np.isinf(p) else 1.0 - 1.0 / (2.0 * p)


def twisted_embed(model: QuasiFreeModel, x, p: float, tau: float) -> np.ndarray:
    """
    T_τ^{(p)}(x) = W^{1/2p+τ} x W^{1/2p-τ} (W^τ x W^-τ for p = inf).

    Args:
        model: The quasi-free model.
        x: Algebra element.
        p: Exponent in [1, inf].
        tau: Twist with |τ| ≤ 1 - 1/2p.

    Returns:
        The L^p representative.
    """
    require(p >= 1, InvalidInputError, f"exponent must be at least 1, got {p}")
    limit = tau_limit(p)
    require(abs(tau) <= limit + 1e-15, InvalidInputError, f"|tau| = {abs(tau)} exceeds {limit} for p = {p}")
    half = 0.0 if np.isinf(p) else 0.5 / p
    return model.sandwich(np.asarray(x, dtype=np.complex128), half + tau, half - tau)


def tau_grid(p: float, points: int = TAU_GRID_POINTS) -> np.ndarray:
    limit = tau_limit(p)
    return np.linspace(-limit, limit, points)


@dataclass
class TwistedNormProfile:
    """Endpoint and interior maxima of τ ↦ ‖T_τ^{(p)}(x)‖_p."""
    endpoint_max: float
    interior_max: float
    values: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def norm(self) -> float:
        return max(self.endpoint_max, self.interior_max)

    @property
    def guard_excess(self) -> float:
        return self.interior_max - self.endpoint_max


def twisted_norm_profile(model: QuasiFreeModel, x, p: float, points: int = TAU_GRID_POINTS) -> TwistedNormProfile:
    taus = tau_grid(p, points)
    values = [(float(t), schatten_norm(twisted_embed(model, x, p, t), p)) for t in taus]
    endpoint_max = max(values[0][1], values[-1][1])
    interior_max = max((v for _, v in values[1:-1]), default=0.0)
    profile = TwistedNormProfile(endpoint_max, interior_max, values)
    if profile.guard_excess > GUARD_TOL * max(1.0, endpoint_max):
        logger.warning(f"twisted norm interior maximum exceeds endpoints by {profile.guard_excess:.3e} (p={p})")
    return profile


def twisted_norm(model: QuasiFreeModel, x, p: float) -> float:
    """
    ‖x‖_{𝕃^p} = sup_{|τ| ≤ 1-1/2p} ‖T_τ^{(p)}(x)‖_p over the endpoints and a 9-point grid.
    """
    return twisted_norm_profile(model, x, p).norm


def haagerup_norm(a, p: float) -> float:
    """Norm of an L^p representative a (for embedded elements a = x W^{1/p})."""
    return schatten_norm(a, p)


def haagerup_trace(a) -> complex:
    """The Haagerup trace, which is the matrix trace at type I."""
    return complex(np.trace(a))


def embed_right(model: QuasiFreeModel, x, p: float) -> np.ndarray:
    """x ↦ x W^{1/p}."""
    return model.sandwich(np.asarray(x, dtype=np.complex128), 0.0, 0.0 if np.isinf(p) else 1.0 / p)


class TwistedElement:
    """An algebra element carrying its integrability exponent and a lazily cached 𝕃^p norm."""

    def __init__(self, model: QuasiFreeModel, x, p: float):
        require(p >= 1, InvalidInputError, f"exponent must be at least 1, got {p}")
        self.model = model
        self.x = np.asarray(x, dtype=np.complex128)
        self.p = float(p)
        self.norm_cache: Optional[float] = None
        self.holder_bound: Optional[float] = None

    def norm(self) -> float:
        if self.norm_cache is None:
            self.norm_cache = twisted_norm(self.model, self.x, self.p)
        return self.norm_cache

    def adjoint(self) -> "TwistedElement":
        return TwistedElement(self.model, self.x.conj().T, self.p)

    def __mul__(self, other: "TwistedElement") -> "TwistedElement":
        return lp_product(self, other)

    def __repr__(self) -> str:
        return f"TwistedElement(p={self.p}, dim={self.x.shape[0]})"


def _inverse(p: float) -> float:
    return 0.0 if np.isinf(p) else 1.0 / p


def lp_product(x: TwistedElement, y: TwistedElement) -> TwistedElement:
    """
    Product in 𝕃^r with 1/r = 1/p + 1/q; the Hölder bound ‖x‖‖y‖ is attached.

    Args:
        x: Element of 𝕃^p.
        y: Element of 𝕃^q over the same model.

    Returns:
        The product as an element of 𝕃^r.
    """
    require(x.model is y.model, InvalidInputError, "elements belong to different models")
    inv_r = _inverse(x.p) + _inverse(y.p)
    require(inv_r <= 1.0 + 1e-12, InvalidInputError, f"1/p + 1/q = {inv_r} exceeds 1")
    r = np.inf if inv_r == 0 else 1.0 / inv_r
    product = TwistedElement(x.model, x.x @ y.x, r)
    product.holder_bound = x.norm() * y.norm()
    return product


def expectation_extend(model: QuasiFreeModel, element: TwistedElement) -> Tuple[complex, float]:
    """
    ω(x) together with the continuity bound ‖x‖_{𝕃^1}.

    Returns:
        (ω(x), ‖x‖_{𝕃^1}).
    """
    return state(model, element.x), twisted_norm(model, element.x, 1.0)


@dataclass
class SpectralLaw:
    """Finitely supported distribution of a self-adjoint element under ω."""
    atoms: List[Tuple[float, float]]

    def total_weight(self) -> float:
        return float(sum(w for _, w in self.atoms))

    def moment(self, k: int) -> float:
        return float(sum(w * v ** k for v, w in self.atoms))

    def absolute_moment(self, k: float) -> float:
        return float(sum(w * abs(v) ** k for v, w in self.atoms))

    def reflect(self) -> "SpectralLaw":
        return SpectralLaw(sorted((-v, w) for v, w in self.atoms))


def spectral_law(model: QuasiFreeModel, x, merge_tol: float = 1e-9) -> SpectralLaw:
    """
    Atoms are the eigenvalues of x, weighted by Σ <v, W v> over each eigenspace.

    Args:
        model: The quasi-free model.
        x: Self-adjoint element.
        merge_tol: Eigenvalues closer than this are merged into one atom.

    Returns:
        The spectral law, atoms sorted by value.
    """
    x = hermitize(x, "spectral-law operand")
    eigenvalues, eigenvectors = linalg.eigh(x)
    weights = np.real(np.einsum('ai,a,ai->i', eigenvectors.conj(), model.weights, eigenvectors))
    atoms: List[Tuple[float, float]] = []
    for value, weight in zip(eigenvalues, weights):
        if atoms and abs(value - atoms[-1][0]) <= merge_tol:
            previous_value, previous_weight = atoms[-1]
            atoms[-1] = (previous_value, previous_weight + float(weight))
        else:
            atoms.append((float(value), float(weight)))
    return SpectralLaw(atoms)

"""
Grassmann SDEs dΨ_t(v) = μ(v)(Ψ_t) dt + dB_t(v) on the grid.

A field Ψ is stored on the standard basis of 𝔥, Ψ(v) = Σ v_k Ψ(e_k). The drift
μ(e_k) is a polynomial in h_dim anticommuting variables with odd-degree terms
only; its linear part ψ ↦ ψ(Av) is split off as μ^A(v) = μ(v) - ψ(Av).
"""

import itertools
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import linalg

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import op_norm
from models.araki_wyss import state
from spaces.filtration import AdaptedSimpleProcess
from stochastic.gbm import GBMProcess
from stochastic.girsanov import SignedExpectation, stochastic_exponential
from stochastic.grassmann import GrassmannPolynomial, poly_eval
from stochastic.ito import ItoProcess, bracket_matrix, parity_flip, real_theta_basis
from utils.error_handlers import DivergenceError, InvalidInputError, InvertibilityError, require

logger = logging.getLogger(__name__)

Field = List[np.ndarray]


@dataclass
class DriftSpec:
    """μ(e_k) for each standard basis vector plus the split-off linear part A."""
    polys: List[GrassmannPolynomial]
    A: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.complex128)
        h_dim = self.A.shape[0]
        require(self.A.shape == (h_dim, h_dim), InvalidInputError, "A must be square")
        require(len(self.polys) == h_dim, InvalidInputError, f"expected {h_dim} drift polynomials")
        for k, poly in enumerate(self.polys):
            require(poly.n_anti == h_dim and poly.n_sym == 0, InvalidInputError,
                    f"drift polynomial {k} must be over {h_dim} odd variables")
            require(poly.parity_of_terms() <= {1}, InvalidInputError, f"drift polynomial {k} has even-degree terms")

    @property
    def h_dim(self) -> int:
        return self.A.shape[0]

    def nonlinear_part(self) -> "DriftSpec":
        """μ^A as a drift with zero linear part."""
        linear = linear_polys(self.A)
        return DriftSpec([p - l for p, l in zip(self.polys, linear)], np.zeros_like(self.A))


def linear_polys(A) -> List[GrassmannPolynomial]:
    """Polynomials of ψ ↦ ψ(A e_k) = Σ_m A_{mk} ψ(e_m)."""
    A = np.asarray(A, dtype=np.complex128)
    h_dim = A.shape[0]
    return [GrassmannPolynomial(h_dim, 0, {((m,), ()): A[m, k] for m in range(h_dim) if A[m, k] != 0})
            for k in range(h_dim)]


def linear_drift(A, mu_matrix=None) -> DriftSpec:
    """μ(v)(ψ) = ψ(A' v) with A' = mu_matrix (A when omitted), linear part A."""
    A = np.asarray(A, dtype=np.complex128)
    return DriftSpec(linear_polys(A if mu_matrix is None else mu_matrix), A)


def cubic_drift(A, coupling: float) -> DriftSpec:
    """μ(e_k)(ψ) = ψ(Ae_k) + g·ψ(e_a)ψ(e_b)ψ(e_c) over the first three indices other than k."""
    A = np.asarray(A, dtype=np.complex128)
    h_dim = A.shape[0]
    require(h_dim >= 4, InvalidInputError, "a cubic drift needs h_dim >= 4")
    polys = []
    for k, lin in enumerate(linear_polys(A)):
        others = tuple(i for i in range(h_dim) if i != k)[:3]
        polys.append(lin + GrassmannPolynomial.anti_monomial(h_dim, 0, others, coupling))
    return DriftSpec(polys, A)


def field_at(psi: Field, v) -> np.ndarray:
    """Ψ(v) = Σ v_k Ψ(e_k)."""
    return np.tensordot(np.asarray(v, dtype=np.complex128), np.asarray(psi), axes=1)


def drift_values(drift: DriftSpec, psi: Field) -> Field:
    """[μ(e_k)(Ψ)]_k."""
    return [poly_eval(poly, psi, (), check_parity=False) for poly in drift.polys]


def default_initial(gbm: GBMProcess) -> Field:
    """X̃_0 on the reserved 𝔥-copy when available, else zero."""
    eye = np.eye(gbm.spec.h_dim)
    if gbm.spec.n_reserved >= gbm.spec.h_dim:
        return [gbm.initial_field(eye[k]) for k in range(gbm.spec.h_dim)]
    return [np.zeros((gbm.dim, gbm.dim), dtype=np.complex128) for _ in range(gbm.spec.h_dim)]


@dataclass
class SDESolution:
    """Fields Ψ_{t_j}(e_k) on every grid level."""
    path: List[Field]
    iterations: int
    residual: float
    increments: List[float] = field(default_factory=list)

    def field(self, level: int, v) -> np.ndarray:
        return field_at(self.path[level], v)


def _driver_path(gbm: GBMProcess) -> List[Field]:
    eye = np.eye(gbm.spec.h_dim)
    return [[gbm.field(j, eye[k]) for k in range(gbm.spec.h_dim)] for j in range(gbm.n_t + 1)]


def _picard_map(gbm: GBMProcess, drift: DriftSpec, psi0: Field, driver: List[Field], path: List[Field]) -> List[Field]:
    delta = gbm.spec.delta
    out = []
    accumulated = [np.zeros_like(psi0[0]) for _ in psi0]
    for j in range(gbm.n_t + 1):
        out.append([psi0[k] + accumulated[k] + driver[j][k] for k in range(len(psi0))])
        if j < gbm.n_t:
            mu_j = drift_values(drift, path[j])
            accumulated = [a + delta * m for a, m in zip(accumulated, mu_j)]
    return out


def sde_strong_solve(gbm: GBMProcess, drift: DriftSpec, psi0: Optional[Field] = None, tol: float = 1e-10,
                     max_iterations: int = 30) -> SDESolution:
    """
    Picard iteration of Ψ_t(v) = Ψ_0(v) + Σ_{j<t} μ(v)(Ψ_{t_j}) δ + X_t(v) on the whole path.

    Args:
        gbm: The driving GBM.
        drift: Drift polynomials on 𝔥 = C^{h_dim}.
        psi0: Odd level-0 initial field; X̃_0 or zero when omitted.
        tol: Stop when the sup operator-norm change falls below tol.
        max_iterations: Iteration cap.

    Returns:
        SDESolution with the fixed point, iteration count and fixed-point residual.

    Raises:
        DivergenceError: If the iteration has not settled after max_iterations.
    """
    require(drift.h_dim == gbm.spec.h_dim, InvalidInputError, "drift and GBM disagree on h_dim")
    psi0 = default_initial(gbm) if psi0 is None else [np.asarray(p, dtype=np.complex128) for p in psi0]
    driver = _driver_path(gbm)
    path = [[psi0[k] + driver[j][k] for k in range(len(psi0))] for j in range(gbm.n_t + 1)]
    history = []
    for iteration in range(1, max_iterations + 1):
        updated = _picard_map(gbm, drift, psi0, driver, path)
        change = max(op_norm(a - b) for new, old in zip(updated, path) for a, b in zip(new, old))
        history.append(change)
        path = updated
        if change < tol:
            check = _picard_map(gbm, drift, psi0, driver, path)
            residual = max(op_norm(a - b) for new, old in zip(check, path) for a, b in zip(new, old))
            logger.debug(f"Picard converged after {iteration} iterations, residual {residual:.2e}")
            return SDESolution(path, iteration, residual, history)
    raise DivergenceError(f"Picard iteration did not converge in {max_iterations} iterations (last change {history[-1]:.3e})")


def ou_closed_form(gbm: GBMProcess, A, psi0: Optional[Field] = None) -> List[Field]:
    """
    Ψ_j(v) = Ψ_0((1+δA)^j v) + Σ_{i<j} ΔX_i((1+δA)^{j-1-i} v).
    """
    A = np.asarray(A, dtype=np.complex128)
    psi0 = default_initial(gbm) if psi0 is None else psi0
    h_dim = gbm.spec.h_dim
    step = np.eye(h_dim) + gbm.spec.delta * A
    powers = [np.linalg.matrix_power(step, n) for n in range(gbm.n_t + 1)]
    path = []
    for j in range(gbm.n_t + 1):
        level = []
        for k in range(h_dim):
            value = field_at(psi0, powers[j][:, k])
            for i in range(j):
                value = value + gbm.increment(i, powers[j - 1 - i][:, k])
            level.append(value)
        path.append(level)
    return path


def ou_continuous_form(gbm: GBMProcess, A, psi0: Optional[Field] = None) -> List[Field]:
    """X_t^A(v) = X̃_0(e^{At}v) + Σ_{i<j} ΔX_i(e^{A(t - t_i)}v)."""
    A = np.asarray(A, dtype=np.complex128)
    psi0 = default_initial(gbm) if psi0 is None else psi0
    times = gbm.filtration.times
    path = []
    for j in range(gbm.n_t + 1):
        level = []
        for k in range(gbm.spec.h_dim):
            value = field_at(psi0, linalg.expm(A * times[j])[:, k])
            for i in range(j):
                value = value + gbm.increment(i, linalg.expm(A * (times[j] - times[i]))[:, k])
            level.append(value)
        path.append(level)
    return path


def path_difference(first: List[Field], second: List[Field]) -> float:
    return max(op_norm(a - b) for x, y in zip(first, second) for a, b in zip(x, y))


@dataclass
class WeakRepresentation:
    """Linear path X^A, its Girsanov density and the moment comparison against the strong solution."""
    linear_path: List[Field]
    signed: SignedExpectation
    strong: SDESolution
    max_residual: float
    rows: List[Dict[str, object]] = field(default_factory=list)


def weak_integrand(gbm: GBMProcess, drift: DriftSpec, linear_path: List[Field]) -> AdaptedSimpleProcess:
    """
    H_j = π(M^{-1} μ^A(v_·)(Ψ_j)) with M_{αβ} = B(v_α, v_β), so that the Girsanov
    drift Σ_β B(v, v_β) π(H(v_β)) equals μ^A(v)(Ψ_j).

    Raises:
        InvertibilityError: If the pairing matrix is singular.
    """
    basis = real_theta_basis(gbm.spec.h_dim)
    m = bracket_matrix(gbm.spec, basis)
    condition = np.linalg.cond(m)
    if not np.isfinite(condition) or condition > 1e12:
        raise InvertibilityError(f"pairing matrix is singular (condition {condition:.3e})")
    m_inv = np.linalg.inv(m)
    nonlinear = drift.nonlinear_part()
    values = np.zeros((gbm.n_t, len(basis), gbm.dim, gbm.dim), dtype=np.complex128)
    for j in range(gbm.n_t):
        mu_k = drift_values(nonlinear, linear_path[j])
        mu_basis = np.array([field_at(mu_k, v) for v in basis])
        values[j] = parity_flip(np.tensordot(m_inv, mu_basis, axes=1))
    return AdaptedSimpleProcess(list(range(gbm.n_t + 1)), values, indexed=True, parity="odd")


def sde_weak_represent(gbm: GBMProcess, drift: DriftSpec, h0: Optional[Field] = None,
                       max_points: int = 4) -> WeakRepresentation:
    """
    Weak solution from the linear process: under Ē^Z the path X^A solves the full SDE.

    The shift h_0 enters as the initial field X̃_0 + h_0 of the linear process, so
    the compared path is X^A_j(v) + h_0((1+δA)^j v), the grid form of
    X^A_t(v) + h_0(e^{At}v), whatever the nonlinear part of the drift. The
    strong solution starts from the same X̃_0 + h_0.

    Compares ω(Ψ^s_{t_1}(e_{k_1})⋯) of the strong solution against Ē^Z(X^A_{t_1}(e_{k_1})⋯)
    over all ordered level/index tuples of length 2 and, when max_points ≥ 4, of length 4
    at the horizon.

    Args:
        gbm: The driving GBM.
        drift: The drift μ with its linear part A.
        h0: Odd level-0 shift, one operator per basis vector of 𝔥.
        max_points: Largest moment order compared.

    Returns:
        WeakRepresentation.
    """
    psi0 = default_initial(gbm)
    if h0 is not None:
        require(len(h0) == gbm.spec.h_dim, InvalidInputError, f"h0 needs {gbm.spec.h_dim} operators, got {len(h0)}")
        psi0 = [p + np.asarray(h, dtype=np.complex128) for p, h in zip(psi0, h0)]
    linear_path = ou_closed_form(gbm, drift.A, psi0)
    H = weak_integrand(gbm, drift, linear_path)
    result = stochastic_exponential(gbm, ItoProcess(gbm, H, check=False))
    signed = SignedExpectation(gbm.filtration, result.Z)
    strong = sde_strong_solve(gbm, drift, psi0)

    rows = []
    h_dim = gbm.spec.h_dim
    tuples = [((s, k), (t, l)) for s in range(1, gbm.n_t + 1) for t in range(1, gbm.n_t + 1)
              for k in range(h_dim) for l in range(h_dim)]
    if max_points >= 4:
        tuples += [tuple((gbm.n_t, k) for k in ks) for ks in itertools.product(range(h_dim), repeat=4)]
    worst = 0.0
    for points in tuples:
        strong_product = np.eye(gbm.dim, dtype=np.complex128)
        weak_product = np.eye(gbm.dim, dtype=np.complex128)
        for level, k in points:
            strong_product = strong_product @ strong.path[level][k]
            weak_product = weak_product @ linear_path[level][k]
        strong_value = state(gbm.model, strong_product)
        weak_value = signed.expectation(weak_product)
        residual = abs(strong_value - weak_value)
        worst = max(worst, residual)
        rows.append({"points": points, "strong": strong_value, "weak": weak_value, "residual": residual})
    logger.info(f"weak representation: max moment residual {worst:.3e} over {len(rows)} test moments")
    return WeakRepresentation(linear_path, signed, strong, worst, rows)

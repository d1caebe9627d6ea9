"""
Itô calculus for the discretized GBM.

Integrands are adapted simple processes indexed on a real Θ-basis {v_α} of 𝔥;
the integral over cell j is Σ_α H_j(v_α) ΔX_j(v_α) with the integrand on the
left. Brackets use the graded pairing Σ_{αβ} B(v_α, v_β) H(v_α) π(H'(v_β)) δ,
π being the parity automorphism, which makes Y Y' - [Y, Y'] an exact martingale
on the grid.
"""

import logging
import os
import sys
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import op_norm, schatten_norm
from spaces.filtration import AdaptedSimpleProcess, column_hardy_norm
from spaces.lp_spaces import twisted_embed, twisted_norm
from stochastic.gbm import GBMProcess, GBMSpec, build_gbm, isometry_constant
from stochastic.grassmann import GrassmannPolynomial, parity_diagonal, poly_derivative, poly_eval
from utils.error_handlers import InvalidInputError, UnsupportedExponentError, require

logger = logging.getLogger(__name__)

__all__ = [
    "AdaptedSimpleProcess", "ItoProcess", "real_theta_basis", "rotated_real_basis", "pairing_matrix",
    "bracket_matrix", "indexed_from_direction", "ito_integral", "ito_isometry_defect", "trace_pairing", "hardy_twisted_norm",
    "quadratic_variation", "ito_formula_residual", "refinement_table", "SCENARIOS",
]


def real_theta_basis(h_dim: int) -> np.ndarray:
    """
    Θ-fixed orthonormal basis of 𝔥 = h̃⊕h̃ (rows): (e_j⊕e_j)/√2 and (ie_j⊕-ie_j)/√2.
    """
    require(h_dim >= 2 and h_dim % 2 == 0, InvalidInputError, f"h_dim must be even and >= 2, got {h_dim}")
    half = h_dim // 2
    rows = []
    for j in range(half):
        v = np.zeros(h_dim, dtype=np.complex128)
        v[j] = v[j + half] = 1.0 / np.sqrt(2.0)
        rows.append(v)
        w = np.zeros(h_dim, dtype=np.complex128)
        w[j], w[j + half] = 1j / np.sqrt(2.0), -1j / np.sqrt(2.0)
        rows.append(w)
    return np.array(rows)


def rotated_real_basis(h_dim: int, rng: np.random.Generator) -> np.ndarray:
    """Another real Θ-basis: a random real orthogonal rotation of real_theta_basis."""
    q, r = np.linalg.qr(rng.standard_normal((h_dim, h_dim)))
    q = q * np.sign(np.diag(r))
    return q @ real_theta_basis(h_dim)


def pairing_matrix(basis: np.ndarray, A=None) -> np.ndarray:
    """M_{αβ} = ⟨A v_α, v_β⟩ (A = identity when omitted)."""
    basis = np.asarray(basis, dtype=np.complex128)
    images = basis if A is None else basis @ np.asarray(A, dtype=np.complex128).T
    return np.array([[np.vdot(images[a], basis[b]) for b in range(len(basis))] for a in range(len(basis))])


def bracket_matrix(spec: GBMSpec, basis: np.ndarray) -> np.ndarray:
    """M_{αβ} = B(v_α, v_β), the pairing of Tr_{G*Θ}."""
    return np.array([[spec.bilinear(va, vb) for vb in basis] for va in basis])


def indexed_from_direction(values, basis: np.ndarray, v) -> np.ndarray:
    """
    Scalar values F_j turned into the indexed map w ↦ F_j ⟨v, w⟩ on the basis,
    so that Σ_α F(v_α) X(v_α) = F X(v).
    """
    values = np.asarray(values, dtype=np.complex128)
    coefficients = np.array([np.vdot(b, v) for b in basis])
    return values[:, None, :, :] * coefficients[None, :, None, None]


def _indexed(gbm: GBMProcess, process: AdaptedSimpleProcess, basis: np.ndarray, direction) -> AdaptedSimpleProcess:
    if process.indexed:
        require(process.values.shape[1] == len(basis), InvalidInputError, "integrand is indexed on another basis")
        return process
    require(direction is not None, InvalidInputError, "a scalar integrand needs a direction v")
    return AdaptedSimpleProcess(process.breakpoints, indexed_from_direction(process.values, basis, direction),
                                indexed=True, parity=process.parity)


def cell_integrand(process: AdaptedSimpleProcess, j: int) -> Optional[np.ndarray]:
    if process.breakpoints[0] <= j < process.breakpoints[-1]:
        return process.value_at(j)
    return None


def ito_integral(gbm: GBMProcess, F: AdaptedSimpleProcess, level: int, direction=None,
                 basis: Optional[np.ndarray] = None, check: bool = True) -> np.ndarray:
    """
    Y_t = Σ_{j < level} Σ_α F_j(v_α) ΔX_j(v_α).

    Args:
        gbm: The driving GBM.
        F: Adapted simple process, scalar (then `direction` is required) or indexed on `basis`.
        level: Grid level of t.
        direction: Vector v for scalar integrands.
        basis: Real Θ-basis; real_theta_basis when omitted.
        check: Whether to verify adaptedness first.

    Returns:
        The integral as a dense operator.
    """
    level = gbm.check_level(level)
    basis = real_theta_basis(gbm.spec.h_dim) if basis is None else np.asarray(basis)
    F = _indexed(gbm, F, basis, direction)
    if check:
        F.check_adapted(gbm.filtration)
    increments = gbm.basis_increments(basis)
    out = np.zeros((gbm.dim, gbm.dim), dtype=np.complex128)
    for j in range(level):
        value = cell_integrand(F, j)
        if value is not None:
            out += np.matmul(value, increments[j]).sum(axis=0)
    return out


def ito_isometry_defect(gbm: GBMProcess, F: AdaptedSimpleProcess, direction, tau: float = 0.0,
                        level: Optional[int] = None) -> Tuple[float, float]:
    """
    Both sides of ‖T_τ^{(2)}(∫F dX(v))‖₂² = c_τ Σ_j δ ‖T_τ^{(2)}(F_j)‖₂² ‖Cv‖² for a scalar F.

    Returns:
        (measured, predicted).
    """
    require(not F.indexed, InvalidInputError, "the isometry check takes a scalar integrand")
    spec = gbm.spec
    level = gbm.n_t if level is None else gbm.check_level(level)
    Y = ito_integral(gbm, F, level, direction)
    measured = schatten_norm(twisted_embed(gbm.model, Y, 2.0, tau), 2.0) ** 2
    direction = np.asarray(direction, dtype=np.complex128)
    norm_cv = float(np.sum((spec.c_diag * np.abs(direction)) ** 2))
    total = 0.0
    for j in range(level):
        value = cell_integrand(F, j)
        if value is not None:
            total += spec.delta * schatten_norm(twisted_embed(gbm.model, value, 2.0, tau), 2.0) ** 2
    return measured, isometry_constant(spec.mu, tau) * total * norm_cv


def trace_pairing(basis: np.ndarray, F_values, H_values, A=None, matrix: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Tr_A(F⊗H) = Σ_{αβ} ⟨Av_α, v_β⟩ F(v_α) H(v_β).

    Args:
        basis: Real Θ-basis the maps are indexed on.
        F_values: Stack of F(v_α).
        H_values: Stack of H(v_β).
        A: Operator on 𝔥; identity when omitted.
        matrix: Precomputed pairing matrix, overriding A.

    Returns:
        Dense operator.
    """
    m = pairing_matrix(basis, A) if matrix is None else np.asarray(matrix)
    return np.einsum('ab,aij,bjk->ik', m, np.asarray(F_values), np.asarray(H_values), optimize=True)


def parity_flip(x: np.ndarray) -> np.ndarray:
    p = parity_diagonal(x.shape[-1])
    return p[..., :, None] * x * p[..., None, :]


@dataclass
class HardyTwistedNorm:
    Hc: float
    Hr: float

    @property
    def combined(self) -> float:
        return max(self.Hc, self.Hr)


def hardy_twisted_norm(gbm: GBMProcess, F: AdaptedSimpleProcess, p: float, level: Optional[int] = None,
                       A=None, basis: Optional[np.ndarray] = None, direction=None) -> HardyTwistedNorm:
    """
    sup_τ ‖(∫|T_τ^{(p)}(F)^#|²_A ds)^{1/2}‖_p for # ∈ {c, r} on [0, t].

    Raises:
        UnsupportedExponentError: For p < 2.
    """
    if p < 2:
        raise UnsupportedExponentError(f"twisted Hardy norms need p >= 2, got {p}")
    basis = real_theta_basis(gbm.spec.h_dim) if basis is None else np.asarray(basis)
    F = _indexed(gbm, F, basis, direction)
    level = gbm.n_t if level is None else gbm.check_level(level)
    stop = min(level, F.breakpoints[-1])
    if stop <= F.breakpoints[0]:
        return HardyTwistedNorm(0.0, 0.0)
    fine = F.refine([stop])
    cut = fine.breakpoints.index(stop)
    truncated = AdaptedSimpleProcess(fine.breakpoints[:cut + 1], fine.values[:cut], True, F.parity)
    m = pairing_matrix(basis, A)
    Hc = column_hardy_norm(gbm.filtration, truncated, p, pairing=m)
    Hr = column_hardy_norm(gbm.filtration, truncated, p, pairing=m, row=True)
    return HardyTwistedNorm(Hc, Hr)


class ItoProcess:
    """
    V_t = V_0 + ∫_0^t ⟨H_s, dX_s⟩ on the grid, keeping its integrand.

    Args:
        gbm: Driving GBM.
        integrand: Indexed adapted simple process, or None for a constant process.
        initial: Level-0 operator V_0 (zero when omitted).
        basis: Real Θ-basis the integrand is indexed on.
    """

    def __init__(self, gbm: GBMProcess, integrand: Optional[AdaptedSimpleProcess] = None, initial=None,
                 basis: Optional[np.ndarray] = None, check: bool = True):
        self.gbm = gbm
        self.basis = real_theta_basis(gbm.spec.h_dim) if basis is None else np.asarray(basis)
        self.initial = np.zeros((gbm.dim, gbm.dim), dtype=np.complex128) if initial is None \
            else np.asarray(initial, dtype=np.complex128)
        if integrand is not None:
            require(integrand.indexed, InvalidInputError, "Itô processes take indexed integrands")
            if check:
                integrand.check_adapted(gbm.filtration)
        if check:
            require(gbm.filtration.is_adapted(self.initial, 0), InvalidInputError, "initial value must be level-0")
        self.integrand = integrand
        self._path: Optional[List[np.ndarray]] = None

    @classmethod
    def constant(cls, gbm: GBMProcess, value) -> "ItoProcess":
        return cls(gbm, None, value)

    @classmethod
    def along(cls, gbm: GBMProcess, v, left=None, initial=None) -> "ItoProcess":
        """∫ left dX(v) with a constant level-0 operator `left` (identity when omitted)."""
        basis = real_theta_basis(gbm.spec.h_dim)
        left = np.eye(gbm.dim, dtype=np.complex128) if left is None else np.asarray(left, dtype=np.complex128)
        values = np.repeat(left[None], gbm.n_t, axis=0)
        integrand = AdaptedSimpleProcess(list(range(gbm.n_t + 1)), indexed_from_direction(values, basis, v),
                                         indexed=True)
        return cls(gbm, integrand, initial, basis)

    def integrand_at(self, j: int) -> Optional[np.ndarray]:
        if self.integrand is None:
            return None
        return cell_integrand(self.integrand, j)

    def increment(self, j: int) -> np.ndarray:
        value = self.integrand_at(j)
        if value is None:
            return np.zeros((self.gbm.dim, self.gbm.dim), dtype=np.complex128)
        return np.matmul(value, self.gbm.basis_increments(self.basis)[j]).sum(axis=0)

    def path(self) -> List[np.ndarray]:
        """[V_0, V_1, ..., V_{n_t}] at the grid levels."""
        if self._path is None:
            values = [self.initial]
            for j in range(self.gbm.n_t):
                values.append(values[-1] + self.increment(j))
            self._path = values
        return self._path

    def value(self, level: int) -> np.ndarray:
        return self.path()[self.gbm.check_level(level)]

    def transform(self, left: Sequence[np.ndarray]) -> "ItoProcess":
        """∫ K̃ dY: integrand K̃_j · H_j(v_α) for adapted scalar values K̃_j, zero initial value."""
        require(len(left) >= self.gbm.n_t, InvalidInputError, "one left factor per cell is required")
        values = np.zeros((self.gbm.n_t, len(self.basis), self.gbm.dim, self.gbm.dim), dtype=np.complex128)
        for j in range(self.gbm.n_t):
            h = self.integrand_at(j)
            if h is not None:
                values[j] = np.matmul(np.asarray(left[j]), h)
        integrand = AdaptedSimpleProcess(list(range(self.gbm.n_t + 1)), values, indexed=True)
        return ItoProcess(self.gbm, integrand, None, self.basis, check=False)


def bracket_increment(first: ItoProcess, second: ItoProcess, j: int,
                      matrix: Optional[np.ndarray] = None) -> np.ndarray:
    """Δ[Y, Y']_j = Σ_{αβ} B(v_α, v_β) H_j(v_α) π(H'_j(v_β)) δ."""
    gbm = first.gbm
    h, h2 = first.integrand_at(j), second.integrand_at(j)
    if h is None or h2 is None:
        return np.zeros((gbm.dim, gbm.dim), dtype=np.complex128)
    m = bracket_matrix(gbm.spec, first.basis) if matrix is None else matrix
    return gbm.spec.delta * trace_pairing(first.basis, h, parity_flip(h2), matrix=m)


def quadratic_variation(gbm: GBMProcess, Y: ItoProcess, Y2: ItoProcess, level: int) -> Tuple[np.ndarray, float]:
    """
    [Y, Y']_t and the compensator defect
    max_{s<t} ‖ω_s(Y_tY'_t - [Y,Y']_t) - (Y_sY'_s - [Y,Y']_s)‖.

    Returns:
        (bracket at level, defect).
    """
    level = gbm.check_level(level)
    require(Y.basis.shape == Y2.basis.shape and np.allclose(Y.basis, Y2.basis), InvalidInputError,
            "both processes must be indexed on the same basis")
    m = bracket_matrix(gbm.spec, Y.basis)
    brackets = [np.zeros((gbm.dim, gbm.dim), dtype=np.complex128)]
    for j in range(level):
        brackets.append(brackets[-1] + bracket_increment(Y, Y2, j, m))
    compensated = [Y.value(k) @ Y2.value(k) - brackets[k] for k in range(level + 1)]
    defect = 0.0
    for s in range(level):
        for t in range(s + 1, level + 1):
            conditioned = gbm.filtration.cond_exp(compensated[t], s)
            defect = max(defect, op_norm(conditioned - compensated[s]))
    return brackets[level], defect


def ito_formula_residual(poly: GrassmannPolynomial, processes: Sequence[ItoProcess], level: Optional[int] = None,
                         p: float = 2.0) -> float:
    """
    ‖Σ_j [F(V_{j+1}) - F(V_j) - Σ_i δV_i ∂_iF(V_j) - ½ Σ_{i,k} Δ[V_i, V_k]_j ∂_k∂_iF(V_j)]‖_{𝕃^p}.

    The first poly.n_anti processes fill the odd slots, the rest the even ones.
    """
    require(len(processes) == poly.n_anti + poly.n_sym, InvalidInputError,
            f"expected {poly.n_anti + poly.n_sym} processes, got {len(processes)}")
    gbm = processes[0].gbm
    level = gbm.n_t if level is None else gbm.check_level(level)
    kinds = [("anti", i) for i in range(poly.n_anti)] + [("sym", i) for i in range(poly.n_sym)]
    first = [poly_derivative(poly, index, kind) for kind, index in kinds]
    second = [[poly_derivative(first[i], index, kind) for kind, index in kinds] for i in range(len(kinds))]
    m = bracket_matrix(gbm.spec, processes[0].basis)

    def evaluate(f: GrassmannPolynomial, j: int) -> np.ndarray:
        values = [proc.value(j) for proc in processes]
        if f.is_zero():
            return np.zeros((gbm.dim, gbm.dim), dtype=np.complex128)
        return poly_eval(f, values[:poly.n_anti], values[poly.n_anti:], check_parity=False)

    total = np.zeros((gbm.dim, gbm.dim), dtype=np.complex128)
    for j in range(level):
        step = evaluate(poly, j + 1) - evaluate(poly, j)
        for i, proc in enumerate(processes):
            if not first[i].is_zero():
                step -= proc.increment(j) @ evaluate(first[i], j)
        for i, proc_i in enumerate(processes):
            for k, proc_k in enumerate(processes):
                if second[i][k].is_zero():
                    continue
                step -= 0.5 * bracket_increment(proc_i, proc_k, j, m) @ evaluate(second[i][k], j)
        total += step
    residual = twisted_norm(gbm.model, total, p)
    logger.debug(f"Itô-formula residual n_t={gbm.n_t}: {residual:.3e}")
    return residual


def _quadratic(gbm: GBMProcess):
    eye = np.eye(gbm.spec.h_dim)
    poly = GrassmannPolynomial.anti_monomial(2, 0, (0, 1))
    return poly, [ItoProcess.along(gbm, eye[0]), ItoProcess.along(gbm, eye[1])]


def _cubic(gbm: GBMProcess):
    eye = np.eye(gbm.spec.h_dim)
    poly = GrassmannPolynomial.anti_monomial(3, 0, (0, 1, 2))
    return poly, [ItoProcess.along(gbm, eye[0]), ItoProcess.along(gbm, eye[1]),
                  ItoProcess.constant(gbm, gbm.reserved_generator(0))]


def _mixed(gbm: GBMProcess):
    eye = np.eye(gbm.spec.h_dim)
    poly = GrassmannPolynomial(1, 1, {((0,), (0,)): 1.0})
    odd = ItoProcess.along(gbm, eye[0])
    even = ItoProcess.along(gbm, eye[1], left=gbm.reserved_generator(0))
    return poly, [odd, even]


def _linear(gbm: GBMProcess):
    eye = np.eye(gbm.spec.h_dim)
    poly = GrassmannPolynomial(2, 0, {((0,), ()): 1.0, ((1,), ()): 2.0})
    return poly, [ItoProcess.along(gbm, eye[0]), ItoProcess.along(gbm, eye[1])]


# name -> (reserved modes, builder)
SCENARIOS: Dict[str, Tuple[int, Callable]] = {
    "linear": (0, _linear),
    "quadratic": (0, _quadratic),
    "cubic": (1, _cubic),
    "mixed": (1, _mixed),
}


def refinement_table(scenario: str, n_ts: Sequence[int] = (1, 2, 4), mu: float = 0.5, T: float = 1.0,
                     h_dim: int = 2) -> pd.DataFrame:
    """
    Itô-formula residuals on refining grids.

    Returns:
        DataFrame with columns n_t, delta, residual, ratio (residual over the previous row's).
    """
    require(scenario in SCENARIOS, InvalidInputError, f"unknown scenario '{scenario}'")
    reserved, builder = SCENARIOS[scenario]
    rows = []
    previous = None
    for n_t in n_ts:
        gbm = build_gbm(GBMSpec(mu=mu, n_t=n_t, T=T, h_dim=h_dim, n_reserved=reserved))
        poly, processes = builder(gbm)
        residual = ito_formula_residual(poly, processes)
        ratio = residual / previous if previous else np.nan
        rows.append({"n_t": n_t, "delta": T / n_t, "residual": residual, "ratio": ratio})
        previous = residual
    logger.info(f"refinement table '{scenario}': " + ", ".join(f"{r['n_t']}:{r['residual']:.3e}" for r in rows))
    return pd.DataFrame(rows, columns=["n_t", "delta", "residual", "ratio"])

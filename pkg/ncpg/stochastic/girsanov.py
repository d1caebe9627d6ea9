"""
Stochastic exponentials, signed expectations and the Girsanov shift.

For an odd indexed integrand H with Y = ∫⟨H, dX⟩, the density is
Z_t = exp(Y_t - ½[Y, Y]_t), computed by its power series (finite, since the
exponent is nilpotent in the Grassmann algebra) and cross-checked against a
dense matrix exponential. Under Ē^Z(a) = ω(a Z_∞) the shifted process
B_t(v) = X_t(v) - Σ_j D_j(v) δ, D_j(v) = Σ_β B(v, v_β) π(H_j(v_β)), is again a GBM.
"""

import itertools
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from scipy import linalg

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.matchings import signed_matching_sum
from kernel.operator_kernel import op_norm
from models.araki_wyss import state
from spaces.filtration import AdaptedSimpleProcess, Filtration
from spaces.lp_spaces import twisted_norm
from stochastic.gbm import GBMProcess, GBMSpec, build_gbm
from stochastic.ito import ItoProcess, bracket_increment, bracket_matrix, parity_flip, real_theta_basis
from utils.error_handlers import InvalidInputError, InvertibilityError, NovikovError, require

logger = logging.getLogger(__name__)

MAX_SERIES_TERMS = 64
CONDITION_LIMIT = 1e12


class SignedExpectation:
    """
    Ē^Z(a) = ω(a Z_∞) with conditional versions Ē_t^Z(a) = ω_t(a Z_∞) Z_t^{-1}.

    Densities and inverses are computed once per level.
    """

    def __init__(self, filtration: Filtration, z_inf, tol: float = 1e-9):
        self.filtration = filtration
        self.model = filtration.model
        self.z_inf = np.asarray(z_inf, dtype=np.complex128)
        normalization = state(self.model, self.z_inf)
        if abs(normalization - 1.0) > tol:
            raise InvalidInputError(f"density has ω(Z) = {normalization:.6g}, expected 1")
        self._density: Dict[int, np.ndarray] = {}
        self._inverse: Dict[int, np.ndarray] = {}
        self.condition_numbers: Dict[int, float] = {}
        self.logger = logging.getLogger(__name__)

    def expectation(self, a) -> complex:
        return state(self.model, np.asarray(a) @ self.z_inf)

    def density(self, level: int) -> np.ndarray:
        """Z_t = ω_t(Z_∞)."""
        if level not in self._density:
            self._density[level] = self.filtration.cond_exp(self.z_inf, level)
        return self._density[level]

    def inverse(self, level: int) -> np.ndarray:
        if level not in self._inverse:
            z = self.density(level)
            condition = float(np.linalg.cond(z))
            self.condition_numbers[level] = condition
            if not np.isfinite(condition) or condition > CONDITION_LIMIT:
                raise InvertibilityError(f"Z at level {level} is singular (condition {condition:.3e})")
            self.logger.debug(f"Z_{level}: condition number {condition:.3e}")
            self._inverse[level] = np.linalg.inv(z)
        return self._inverse[level]

    def cond_exp(self, a, level: int) -> np.ndarray:
        return self.filtration.cond_exp(np.asarray(a) @ self.z_inf, level) @ self.inverse(level)


def signed_cond_exp(se: SignedExpectation, a, level: int) -> np.ndarray:
    """Ē_t^Z(a) = ω_t(a Z_∞) Z_t^{-1}."""
    return se.cond_exp(a, level)


@dataclass
class ExponentialResult:
    """Z_t and the diagnostics of its series."""
    Z: np.ndarray
    exponent: np.ndarray
    terms: int
    expm_defect: float
    novikov_bound: float


def exponential_series(exponent: np.ndarray, tol: float = 1e-14, max_terms: int = MAX_SERIES_TERMS) -> Tuple[np.ndarray, int]:
    """
    Σ_k e^k / k! until a term vanishes below tol.

    Raises:
        NovikovError: If the terms have not died out after max_terms.
    """
    dim = exponent.shape[0]
    total = np.eye(dim, dtype=np.complex128)
    term = np.eye(dim, dtype=np.complex128)
    scale = max(1.0, op_norm(exponent))
    for k in range(1, max_terms + 1):
        term = term @ exponent / k
        if op_norm(term) <= tol * scale:
            return total, k
        total = total + term
    raise NovikovError(f"exponential series did not converge within {max_terms} terms")


def integrand_process(gbm: GBMProcess, H) -> ItoProcess:
    if isinstance(H, ItoProcess):
        return H
    require(isinstance(H, AdaptedSimpleProcess) and H.indexed, InvalidInputError,
            "H must be an indexed adapted simple process")
    return ItoProcess(gbm, H)


def exponent_path(gbm: GBMProcess, H) -> List[np.ndarray]:
    """e_j = Y_j - ½[Y, Y]_j for every level j."""
    Y = integrand_process(gbm, H)
    m = bracket_matrix(gbm.spec, Y.basis)
    path = [np.zeros((gbm.dim, gbm.dim), dtype=np.complex128)]
    bracket = np.zeros((gbm.dim, gbm.dim), dtype=np.complex128)
    for j in range(gbm.n_t):
        bracket = bracket + bracket_increment(Y, Y, j, m)
        path.append(Y.value(j + 1) - Y.initial - 0.5 * bracket)
    return path


def stochastic_exponential(gbm: GBMProcess, H, level: Optional[int] = None) -> ExponentialResult:
    """
    Z_t = Σ_j (∫⟨H, dX⟩ - ½∫Tr_{G*Θ}(H⊗H) ds)^j / j!.

    Args:
        gbm: The driving GBM.
        H: Odd indexed adapted simple process (or an ItoProcess carrying it).
        level: Grid level of t; the horizon when omitted.

    Returns:
        ExponentialResult with the series value and its matrix-exponential defect.
    """
    level = gbm.n_t if level is None else gbm.check_level(level)
    exponent = exponent_path(gbm, H)[level]
    Z, terms = exponential_series(exponent)
    defect = float(np.abs(Z - linalg.expm(exponent)).max())
    bound = float(np.exp(op_norm(exponent)))
    logger.debug(f"stochastic exponential: {terms} terms, expm defect {defect:.2e}, Novikov bound {bound:.3g}")
    return ExponentialResult(Z, exponent, terms, defect, bound)


def exponential_path(gbm: GBMProcess, H) -> List[np.ndarray]:
    return [exponential_series(e)[0] for e in exponent_path(gbm, H)]


def series_inverse_defect(result: ExponentialResult) -> float:
    """‖exp(-e) - Z^{-1}‖ with exp(-e) from the series."""
    inverse, _ = exponential_series(-result.exponent)
    return float(np.abs(inverse - np.linalg.inv(result.Z)).max())


def exponential_equation_residual(gbm: GBMProcess, H, p: float = 2.0) -> float:
    """‖Z_t - 1 - Σ_j Z_j ΔY_j‖_{𝕃^p} at the horizon."""
    Y = integrand_process(gbm, H)
    zs = exponential_path(gbm, H)
    total = zs[-1] - np.eye(gbm.dim)
    for j in range(gbm.n_t):
        total = total - zs[j] @ Y.increment(j)
    return twisted_norm(gbm.model, total, p)


def reserved_integrand(gbm: GBMProcess, terms: Sequence[Tuple[int, Sequence[complex]]], lam: float = 1.0,
                       basis: Optional[np.ndarray] = None) -> AdaptedSimpleProcess:
    """
    H_s(v) = λ Σ θ_r ⟨w_r, v⟩, constant in time.

    Args:
        gbm: The GBM providing reserved generators.
        terms: Pairs (reserved index r, vector w_r).
        lam: Coupling λ.
        basis: Real Θ-basis; real_theta_basis when omitted.
    """
    basis = real_theta_basis(gbm.spec.h_dim) if basis is None else np.asarray(basis)
    values = np.zeros((len(basis), gbm.dim, gbm.dim), dtype=np.complex128)
    for r, w in terms:
        theta = gbm.reserved_generator(r)
        for a, v in enumerate(basis):
            values[a] += lam * np.vdot(np.asarray(w, dtype=np.complex128), v) * theta
    return AdaptedSimpleProcess(list(range(gbm.n_t + 1)), np.repeat(values[None], gbm.n_t, axis=0),
                                indexed=True, parity="odd")


def exponential_refinement_table(n_ts: Sequence[int] = (1, 2, 4), mu: float = 0.5, T: float = 1.0,
                                 lam: float = 0.3) -> pd.DataFrame:
    """Residual of Z = 1 + ∫Z dY for H = λ(θ_0⟨e_0,·⟩ + θ_1⟨e_1,·⟩) on refining grids."""
    rows = []
    previous = None
    for n_t in n_ts:
        gbm = build_gbm(GBMSpec(mu=mu, n_t=n_t, T=T, h_dim=2, n_reserved=2))
        eye = np.eye(2)
        H = reserved_integrand(gbm, [(0, eye[0]), (1, eye[1])], lam)
        residual = exponential_equation_residual(gbm, H)
        rows.append({"n_t": n_t, "delta": T / n_t, "residual": residual,
                     "ratio": residual / previous if previous else np.nan})
        previous = residual
    return pd.DataFrame(rows, columns=["n_t", "delta", "residual", "ratio"])


def matching_moment(spec: GBMSpec, points: Sequence[Tuple[float, Sequence[complex]]]) -> complex:
    """
    Σ over perfect matchings of sign · Π (t_i∧t_j) B(v_i, v_j).

    Args:
        spec: GBM parameters fixing B.
        points: (time, vector) pairs in operator order.

    Returns:
        The predicted moment ω(X_{t_1}(v_1)⋯X_{t_n}(v_n)).
    """
    def two_point(i: int, j: int) -> complex:
        (ti, vi), (tj, vj) = points[i], points[j]
        return min(ti, tj) * spec.bilinear(vi, vj)

    return complex(signed_matching_sum(two_point, len(points)))


class GirsanovShift:
    """B_t(v) = X_t(v) - Σ_{j<t} D_j(v) δ with D_j(v) = Σ_β B(v, v_β) π(H_j(v_β))."""

    def __init__(self, gbm: GBMProcess, Y: ItoProcess):
        self.gbm = gbm
        self.Y = Y

    def drift(self, j: int, v) -> np.ndarray:
        h = self.Y.integrand_at(j)
        if h is None:
            return np.zeros((self.gbm.dim, self.gbm.dim), dtype=np.complex128)
        coefficients = np.array([self.gbm.spec.bilinear(v, vb) for vb in self.Y.basis])
        return np.tensordot(coefficients, parity_flip(h), axes=1)

    def field(self, level: int, v) -> np.ndarray:
        level = self.gbm.check_level(level)
        out = self.gbm.field(level, v)
        for j in range(level):
            out = out - self.gbm.spec.delta * self.drift(j, v)
        return out


def girsanov_shift(gbm: GBMProcess, H) -> Tuple[GirsanovShift, SignedExpectation]:
    """
    Girsanov pair for an odd adapted integrand H.

    Returns:
        (shifted process B, signed expectation Ē^Z with Z = Z_∞ of H).
    """
    Y = integrand_process(gbm, H)
    result = stochastic_exponential(gbm, Y)
    return GirsanovShift(gbm, Y), SignedExpectation(gbm.filtration, result.Z)


def signed_martingale_defect(se: SignedExpectation, fields: Callable[[int, object], np.ndarray], v,
                             n_t: int) -> float:
    """max_{s<t} ‖Ē_s(M_t(v)) - M_s(v)‖ for a field family M."""
    path = [fields(k, v) for k in range(n_t + 1)]
    defect = 0.0
    for s in range(n_t):
        for t in range(s + 1, n_t + 1):
            defect = max(defect, op_norm(se.cond_exp(path[t], s) - path[s]))
    return defect


def bracket_compensator_defect(shift: GirsanovShift, se: SignedExpectation, v, v2) -> float:
    """Ē-martingale defect of B_t(v)B_t(v') - t B(v, v'), i.e. [B(v), B(v')] = [X(v), X(v')]."""
    gbm = shift.gbm
    bracket = gbm.spec.bilinear(v, v2)
    eye = np.eye(gbm.dim)
    return signed_martingale_defect(
        se, lambda k, _: shift.field(k, v) @ shift.field(k, v2) - k * gbm.spec.delta * bracket * eye, None, gbm.n_t)


def transform_martingale_defect(shift: GirsanovShift, se: SignedExpectation, left: Sequence[np.ndarray], v) -> float:
    """Ē-martingale defect of Σ_{j<t} K_j ΔB_j(v) for adapted K."""
    gbm = shift.gbm
    path = [np.zeros((gbm.dim, gbm.dim), dtype=np.complex128)]
    for j in range(gbm.n_t):
        delta_b = shift.field(j + 1, v) - shift.field(j, v)
        path.append(path[-1] + np.asarray(left[j]) @ delta_b)
    return signed_martingale_defect(se, lambda k, _: path[k], None, gbm.n_t)


def girsanov_moment_residual(shift: GirsanovShift, se: SignedExpectation,
                             points: Sequence[Tuple[int, Sequence[complex]]]) -> float:
    """|Ē^Z(B_{t_1}(v_1)⋯) - matching_moment| for (level, vector) points."""
    gbm = shift.gbm
    product = np.eye(gbm.dim, dtype=np.complex128)
    for level, v in points:
        product = product @ shift.field(level, v)
    predicted = matching_moment(gbm.spec, [(level * gbm.spec.delta, v) for level, v in points])
    return abs(se.expectation(product) - predicted)


def levy_reference(pairing: np.ndarray, subset: Tuple[int, ...],
                   memo: Optional[Dict[Tuple[int, ...], Polynomial]] = None) -> Polynomial:
    """
    Brownian reference S̄_𝓐(t) from S̄_∅ = 1 and
    S̄_𝓐(t) = Σ_{i<j} (-1)^{i+j+1} B(f_i, f_j) ∫_0^t S̄_{𝓐∖{i,j}}(s) ds.
    """
    memo = {} if memo is None else memo
    if subset in memo:
        return memo[subset]
    if not subset:
        result = Polynomial([1.0 + 0j])
    elif len(subset) % 2:
        result = Polynomial([0j])
    else:
        result = Polynomial([0j])
        for i, j in itertools.combinations(range(len(subset)), 2):
            rest = subset[:i] + subset[i + 1:j] + subset[j + 1:]
            sign = (-1) ** (i + j + 1)
            result = result + sign * pairing[subset[i], subset[j]] * levy_reference(pairing, rest, memo).integ()
    memo[subset] = result
    return result


@dataclass
class LevyReport:
    max_deviation: float
    rows: List[Dict[str, object]] = field(default_factory=list)


def levy_check(gbm: GBMProcess, fields: Callable[[int, object], np.ndarray], se: Optional[SignedExpectation],
               directions: Sequence[Sequence[complex]], max_order: int = 4) -> LevyReport:
    """
    Compares S_𝓐(t) = Ē(B_t(f_{a_1})⋯B_t(f_{a_k})) with the Brownian reference for
    every ordered subset 𝓐 of the directions up to max_order, at every grid level.

    Args:
        gbm: The GBM whose grid and pairing define the reference.
        fields: Candidate process, fields(level, f).
        se: Signed expectation; plain ω when None.
        directions: Vectors f_i in 𝔥.
        max_order: Largest subset size.

    Returns:
        LevyReport with the largest coefficient deviation.
    """
    expectation = (lambda a: state(gbm.model, a)) if se is None else se.expectation
    pairing = np.array([[gbm.spec.bilinear(f, g) for g in directions] for f in directions])
    memo: Dict[Tuple[int, ...], Polynomial] = {}
    report = LevyReport(0.0)
    for level in range(1, gbm.n_t + 1):
        t = level * gbm.spec.delta
        values = [fields(level, f) for f in directions]
        for size in range(1, max_order + 1):
            for subset in itertools.combinations(range(len(directions)), size):
                product = np.eye(gbm.dim, dtype=np.complex128)
                for i in subset:
                    product = product @ values[i]
                measured = expectation(product)
                reference = complex(levy_reference(pairing, subset, memo)(t))
                deviation = abs(measured - reference)
                report.rows.append({"level": level, "subset": subset, "measured": measured,
                                    "reference": reference, "deviation": deviation})
                report.max_deviation = max(report.max_deviation, deviation)
    logger.debug(f"Lévy check: max deviation {report.max_deviation:.3e} over {len(report.rows)} coefficients")
    return report

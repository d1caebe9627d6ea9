"""
The quasi-free CAR model (𝓜, ω) at finite dimension.

The algebra is the full matrix algebra on Γ_a(C^d), the state is
ω(x) = trace(W x) with the product density W = ⊗ diag(1-ν_i, ν_i),
ν_i = 1/(1+ρ_i^4), and the field γ(f) is the standard annihilator c(Sf) with
S = (ρ^2 + ρ^-2)^{1/2}. This reproduces the two-point function
ω(γ*(f)γ(g)) = <g, ρ^-2 f> without doubling the Fock space; the literal
doubled construction is kept as DoubledGNSOracle for cross-checks.
"""

import itertools
import logging
import os
import sys
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.car_fock import FockBasis
from kernel.operator_kernel import PositiveOperator, random_operator, schatten_norm
from utils.error_handlers import InvalidInputError, ResourceError, ensure_finite, require

logger = logging.getLogger(__name__)

PRIMED_POWERS = (-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0)
MAX_WICK_DIM = 5


class QuasiFreeModel:
    """
    One-particle data (ρ, Θ) plus the reference density W on the Fock space.

    Θ is encoded as an involutive permutation: (Θf)_i = conj(f_{perm[i]}).
    """

    def __init__(self, rho: Sequence[float], theta_perm: Optional[Sequence[int]] = None, cap: int = None):
        rho = ensure_finite(rho, "rho spectrum").astype(float).ravel()
        require(rho.size >= 1, InvalidInputError, "rho spectrum must be non-empty")
        require(bool(np.all((rho > 0) & (rho < 1))), InvalidInputError,
                f"rho spectrum must lie in (0, 1), got {rho}")
        d = rho.size
        perm = np.arange(d) if theta_perm is None else np.asarray(theta_perm, dtype=int)
        require(perm.shape == (d,) and sorted(perm.tolist()) == list(range(d)), InvalidInputError,
                "theta permutation must be a permutation of the modes")
        require(bool(np.all(perm[perm] == np.arange(d))), InvalidInputError, "theta must be an involution")
        require(bool(np.allclose(rho[perm], rho)), InvalidInputError, "theta must commute with rho")

        self.d = d
        self.rho = rho
        self.theta_perm = perm
        self.basis = FockBasis(d, cap)
        self.nu = 1.0 / (1.0 + rho ** 4)
        self.field_scale = np.sqrt(rho ** 2 + rho ** -2)

        weights = np.ones(self.basis.dim)
        for i in range(d):
            occupied = ((self.basis.states >> i) & 1).astype(bool)
            weights *= np.where(occupied, self.nu[i], 1.0 - self.nu[i])
        self.W = PositiveOperator.from_diagonal(weights)
        self.power_cache: Dict[float, np.ndarray] = {z: self.W.weights(z) for z in PRIMED_POWERS}
        logger.debug(f"Built quasi-free model d={d}, rho={rho}, dim={self.basis.dim}")

    def __repr__(self) -> str:
        return f"QuasiFreeModel(d={self.d}, rho={self.rho.tolist()})"

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def weights(self) -> np.ndarray:
        return np.real(self.power_cache[1.0])

    def w_power(self, z: complex) -> np.ndarray:
        """Diagonal of W^z, from the primed cache when available."""
        if z in self.power_cache:
            return self.power_cache[z]
        return self.W.weights(z)

    def sandwich(self, x, left: complex, right: complex) -> np.ndarray:
        """W^left · x · W^right."""
        return self.w_power(left)[:, None] * x * self.w_power(right)[None, :]

    def theta(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=np.complex128)
        return np.conj(f)[self.theta_perm]

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=np.complex128)

    def leg_mode(self, leg: int) -> int:
        """Fock mode touched by the 𝓚-basis vector `leg` (e_k⊕0 or 0⊕e_i)."""
        return leg if leg < self.d else int(self.theta_perm[leg - self.d])

    @cached_property
    def wick_basis(self) -> "WickBasis":
        return WickBasis(self)


def build_model(rho_spectrum: Sequence[float], theta_perm: Optional[Sequence[int]] = None,
                cap: int = None) -> QuasiFreeModel:
    """
    Builds the quasi-free model for a diagonal symbol ρ.

    Args:
        rho_spectrum: Values of ρ on the standard basis, each in (0, 1).
        theta_perm: Involutive permutation encoding Θ; identity when omitted.
        cap: Optional override of the dense mode cap.

    Returns:
        The model with W primed at the standard exponents.
    """
    return QuasiFreeModel(rho_spectrum, theta_perm, cap)


def _check_length(model: QuasiFreeModel, f, length: int) -> np.ndarray:
    f = ensure_finite(f, "one-particle vector").astype(np.complex128).ravel()
    if f.shape[0] != length:
        raise InvalidInputError(f"vector has length {f.shape[0]}, expected {length}")
    return f


def gamma_sparse(model: QuasiFreeModel, f):
    f = _check_length(model, f, model.d)
    return model.basis.annihilator_sparse(model.field_scale * f)


def gamma(model: QuasiFreeModel, f) -> np.ndarray:
    """γ(f) = c(Sf); antilinear in f."""
    return gamma_sparse(model, f).toarray()


def gamma_star(model: QuasiFreeModel, f) -> np.ndarray:
    """γ*(f), linear in f."""
    return gamma_sparse(model, f).conj().T.toarray()


def beta_sparse(model: QuasiFreeModel, big_f):
    big_f = _check_length(model, big_f, 2 * model.d)
    f, f_prime = big_f[:model.d], big_f[model.d:]
    created = gamma_sparse(model, f / model.rho).conj().T
    annihilated = gamma_sparse(model, model.theta(model.rho * f_prime))
    return (created + annihilated).tocsr()


def beta(model: QuasiFreeModel, big_f) -> np.ndarray:
    """
    β(f⊕f') = γ*(ρ^-1 f) + γ(Θρ f'), linear in f⊕f'.

    Args:
        model: The quasi-free model.
        big_f: Vector of length 2d on 𝓚 = 𝓗⊕𝓗.

    Returns:
        Dense field operator.
    """
    return beta_sparse(model, big_f).toarray()


def k_unit(model: QuasiFreeModel, leg: int) -> np.ndarray:
    e = np.zeros(2 * model.d, dtype=np.complex128)
    e[leg] = 1.0
    return e


def state(model: QuasiFreeModel, x) -> complex:
    """ω(x) = trace(W x)."""
    x = np.asarray(x)
    if x.shape != (model.dim, model.dim):
        raise InvalidInputError(f"operator has shape {x.shape}, expected {(model.dim, model.dim)}")
    return complex(np.dot(model.weights, np.diag(x)))


def modular_flow(model: QuasiFreeModel, x, tau: complex) -> np.ndarray:
    """
    [x]_τ = W^τ x W^-τ; the modular group is σ_t(x) = [x]_{it}.

    Args:
        model: The quasi-free model.
        x: Operator.
        tau: Real or complex continuation parameter.

    Returns:
        The flowed operator.
    """
    return model.sandwich(np.asarray(x, dtype=np.complex128), tau, -tau)


def sigma(model: QuasiFreeModel, x, t: float) -> np.ndarray:
    return modular_flow(model, x, 1j * t)


def kms_defect(model: QuasiFreeModel, x, y) -> float:
    """|ω(x[y]_1) - ω(yx)|."""
    return abs(state(model, x @ modular_flow(model, y, 1.0)) - state(model, y @ x))


def wick(model: QuasiFreeModel, fs: Sequence) -> np.ndarray:
    """
    Wick product ⟦β(f_1)⋯β(f_n)⟧ by the recursion
    ⟦β(f)β(F)⟧ = β(f)⟦β(F)⟧ + Σ_j (-1)^j ω(β(f)β(f_j)) ⟦β(F without f_j)⟧.

    Args:
        model: The quasi-free model.
        fs: Vectors on 𝓚, at most 2d of them.

    Returns:
        Dense Wick monomial.
    """
    require(len(fs) <= 2 * model.d, InvalidInputError, f"Wick degree {len(fs)} exceeds 2d = {2 * model.d}")
    ops = [beta(model, f) for f in fs]
    two_point = {(i, j): state(model, ops[i] @ ops[j]) for i in range(len(ops)) for j in range(len(ops)) if i < j}
    return _wick_recursion(ops, two_point, model.identity())


def _wick_recursion(ops: List[np.ndarray], two_point: Dict[Tuple[int, int], complex],
                    identity: np.ndarray) -> np.ndarray:
    memo: Dict[Tuple[int, ...], np.ndarray] = {(): identity}

    def build(idx: Tuple[int, ...]) -> np.ndarray:
        if idx in memo:
            return memo[idx]
        head, tail = idx[0], idx[1:]
        out = ops[head] @ build(tail)
        for pos, j in enumerate(tail, start=1):
            coefficient = two_point[(head, j)]
            if coefficient != 0:
                out = out + ((-1) ** pos) * coefficient * build(tail[:pos - 1] + tail[pos:])
        memo[idx] = out
        return out

    return build(tuple(range(len(ops))))


def wick_gram(model: QuasiFreeModel, left: Sequence, right: Sequence, tau: float = 0.0) -> complex:
    """
    ω(⟦β(F)⟧* [⟦β(G)⟧]_τ) from two-point data alone: det[ω(β(f_i)* [β(g_j)]_τ)].

    The flow [·]_τ preserves ω and maps fields to fields, so it commutes with
    Wick ordering and the Gram determinant applies to the flowed legs.
    """
    if len(left) != len(right):
        return 0.0
    if not left:
        return 1.0
    lops = [beta(model, f) for f in left]
    rops = [modular_flow(model, beta(model, g), tau) for g in right]
    table = np.array([[state(model, a.conj().T @ b) for b in rops] for a in lops])
    return complex(np.linalg.det(table))


class WickBasis:
    """
    The orthonormal Wick monomials ⟦β(e_F)⟧ over the 𝓚-basis, all 4^d of them.

    Orthonormality under ω(x*y) makes decomposition a set of state evaluations.
    """

    def __init__(self, model: QuasiFreeModel):
        if model.d > MAX_WICK_DIM:
            raise ResourceError(f"Wick basis limited to d <= {MAX_WICK_DIM}, got d = {model.d}")
        self.model = model
        n_legs = 2 * model.d
        self.legs: List[Tuple[int, ...]] = [
            legs for degree in range(n_legs + 1) for legs in itertools.combinations(range(n_legs), degree)
        ]
        self.index = {legs: n for n, legs in enumerate(self.legs)}
        self.degrees = np.array([len(legs) for legs in self.legs])

        ops = [beta(model, k_unit(model, leg)) for leg in range(n_legs)]
        two_point = {(i, j): state(model, ops[i] @ ops[j]) for i in range(n_legs) for j in range(n_legs) if i < j}
        memo: Dict[Tuple[int, ...], np.ndarray] = {(): model.identity()}
        for legs in self.legs[1:]:
            head, tail = legs[0], legs[1:]
            out = ops[head] @ memo[tail]
            for pos, j in enumerate(tail, start=1):
                coefficient = two_point[(head, j)]
                if coefficient != 0:
                    out = out + ((-1) ** pos) * coefficient * memo[tail[:pos - 1] + tail[pos:]]
            memo[legs] = out
        self.stack = np.stack([memo[legs] for legs in self.legs])
        logger.debug(f"Wick basis built: {len(self.legs)} monomials of dim {model.dim}")

    def monomial(self, legs: Sequence[int]) -> np.ndarray:
        return self.stack[self.index[tuple(legs)]]

    def decompose(self, x) -> np.ndarray:
        """Coefficients c_F = ω(⟦β(e_F)⟧* x), ordered like self.legs."""
        x = np.asarray(x, dtype=np.complex128)
        return np.einsum('nba,ba,a->n', self.stack.conj(), x, self.model.weights)

    def recompose(self, coefficients) -> np.ndarray:
        return np.tensordot(np.asarray(coefficients), self.stack, axes=1)

    def gram(self) -> np.ndarray:
        return np.einsum('nba,mba,a->nm', self.stack.conj(), self.stack, self.model.weights)

    def coefficient_map(self, x, tol: float = 1e-12) -> Dict[Tuple[int, ...], complex]:
        coefficients = self.decompose(x)
        return {legs: complex(c) for legs, c in zip(self.legs, coefficients) if abs(c) > tol}


def wick_basis_decompose(model: QuasiFreeModel, x) -> Dict[Tuple[int, ...], complex]:
    """Nonzero Wick coefficients of x keyed by strictly increasing leg tuples."""
    return model.wick_basis.coefficient_map(x)


def ou_semigroup(model: QuasiFreeModel, x, t: float) -> np.ndarray:
    """
    P_t scales every degree-n Wick coefficient by e^{-tn}.

    Args:
        model: The quasi-free model (d within the Wick-basis cap).
        x: Operator.
        t: Non-negative time.

    Returns:
        P_t(x).
    """
    require(t >= 0, InvalidInputError, f"OU time must be non-negative, got {t}")
    basis = model.wick_basis
    return basis.recompose(basis.decompose(x) * np.exp(-t * basis.degrees))


def ou_lp_map(model: QuasiFreeModel, a, t: float, p: float, q: float, tau: float = 0.0) -> np.ndarray:
    """
    P_t^{(p,q)}: T_τ^{(p)}(x) ↦ T_τ^{(q)}(P_t x).

    The same twist τ is used on both sides, so degree-n Wick monomials satisfy
    T_τ^{(q)}(⟦F⟧) = e^{tn} P_t^{(p,q)}(T_τ^{(p)}(⟦F⟧)).
    """
    x = model.sandwich(np.asarray(a), -(0.5 / p + tau), -(0.5 / p - tau))
    y = ou_semigroup(model, x, t)
    return model.sandwich(y, 0.5 / q + tau, 0.5 / q - tau)


def hyper_ratio(model: QuasiFreeModel, x, t: float, p: float, q: float) -> float:
    """‖P_t(x) W^{1/q}‖_q / ‖x W^{1/p}‖_p."""
    denominator = schatten_norm(model.sandwich(x, 0.0, 1.0 / p), p)
    if denominator == 0:
        return 0.0
    numerator = schatten_norm(model.sandwich(ou_semigroup(model, x, t), 0.0, 1.0 / q), q)
    return numerator / denominator


def hyper_norm_estimate(model: QuasiFreeModel, t: float, p: float, q: float, probes: int = 200,
                        seed: int = 0, ascent_starts: int = 3, ascent_iterations: int = 2000):
    """
    Stochastic lower estimate of the norm of P_t from 𝓐W^{1/p} to 𝓐W^{1/q}.

    The identity is always among the probes (ratio exactly 1), followed by
    seeded complex Gaussian probes; the best few are refined by Nelder–Mead
    ascent on the real and imaginary parts.

    Args:
        model: The quasi-free model.
        t: OU time.
        p: Source exponent in (1, inf).
        q: Target exponent in (1, inf).
        probes: Number of probes including the identity.
        seed: Seed of the probe generator.
        ascent_starts: How many of the best probes are refined.
        ascent_iterations: Iteration cap of each refinement.

    Returns:
        (estimate, argmax operator).
    """
    require(probes >= 1, InvalidInputError, "at least one probe is required")
    require(p > 1 and q > 1, InvalidInputError, "exponents must exceed 1")
    rng = np.random.default_rng(seed)
    dim = model.dim
    candidates = [model.identity()] + [random_operator(rng, dim) for _ in range(probes - 1)]
    ratios = np.array([hyper_ratio(model, x, t, p, q) for x in candidates])

    best_value = float(ratios.max())
    best_x = candidates[int(ratios.argmax())]

    def objective(v: np.ndarray) -> float:
        x = (v[:dim * dim] + 1j * v[dim * dim:]).reshape(dim, dim)
        return -hyper_ratio(model, x, t, p, q)

    for start in np.argsort(-ratios)[:ascent_starts]:
        x0 = candidates[int(start)]
        v0 = np.concatenate([x0.real.ravel(), x0.imag.ravel()])
        result = optimize.minimize(objective, v0, method='Nelder-Mead',
                                   options={'maxiter': ascent_iterations, 'xatol': 1e-10, 'fatol': 1e-13})
        if -result.fun > best_value:
            best_value = float(-result.fun)
            best_x = (result.x[:dim * dim] + 1j * result.x[dim * dim:]).reshape(dim, dim)

    logger.debug(f"hyper_norm_estimate t={t:.4f} p={p} q={q}: {best_value:.8f}")
    return best_value, best_x


def hyper_threshold(model: QuasiFreeModel, p: float, q: float, times: Sequence[float], probes: int = 100,
                    seed: int = 0, slack: float = 1e-6):
    """
    Scans OU times and reports the first one at which the estimate is ≤ 1 + slack.

    Returns:
        (t_star or None, list of (t, estimate)).
    """
    profile = []
    t_star = None
    for t in times:
        estimate, _ = hyper_norm_estimate(model, t, p, q, probes=probes, seed=seed)
        profile.append((float(t), estimate))
        if t_star is None and estimate <= 1.0 + slack:
            t_star = float(t)
    return t_star, profile


class DoubledGNSOracle:
    """
    Literal construction on Γ_a(𝓗⊕𝓗): γ(f) = a(ρf⊕0) + a*(0⊕ρ^-1Θf), vacuum state.

    Independent of the density-matrix realization and used only to compare moments.
    """

    def __init__(self, model: QuasiFreeModel, cap: int = None):
        self.model = model
        self.basis = FockBasis(2 * model.d, cap)

    def gamma(self, f) -> np.ndarray:
        f = _check_length(self.model, f, self.model.d)
        zeros = np.zeros(self.model.d, dtype=np.complex128)
        left = self.basis.annihilator_sparse(np.concatenate([self.model.rho * f, zeros]))
        right = self.basis.creator_sparse(np.concatenate([zeros, self.model.theta(f) / self.model.rho]))
        return (left + right).toarray()

    def gamma_star(self, f) -> np.ndarray:
        return self.gamma(f).conj().T

    def state(self, x) -> complex:
        return complex(np.asarray(x)[0, 0])


def gns_doubled_oracle(model: QuasiFreeModel, cap: int = None) -> DoubledGNSOracle:
    return DoubledGNSOracle(model, cap)


def oracle_moment_defect(model: QuasiFreeModel, max_degree: int = 4, cap: int = None) -> float:
    """
    Largest disagreement between the density-matrix model and the doubled oracle
    over all words of length ≤ max_degree in {γ(e_i), γ*(e_i)}.
    """
    oracle = gns_doubled_oracle(model, cap)
    eye = np.eye(model.d)
    model_gens = [gamma(model, eye[i]) for i in range(model.d)] + [gamma_star(model, eye[i]) for i in range(model.d)]
    oracle_gens = [oracle.gamma(eye[i]) for i in range(model.d)] + [oracle.gamma_star(eye[i]) for i in range(model.d)]
    worst = abs(state(model, model.identity()) - oracle.state(np.eye(oracle.basis.dim)))
    for degree in range(1, max_degree + 1):
        for word in itertools.product(range(len(model_gens)), repeat=degree):
            a = model.identity()
            b = np.eye(oracle.basis.dim, dtype=np.complex128)
            for g in word:
                a = a @ model_gens[g]
                b = b @ oracle_gens[g]
            worst = max(worst, abs(state(model, a) - oracle.state(b)))
    return worst

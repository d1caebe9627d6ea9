"""
Discretized Grassmann Brownian martingales inside the quasi-free model.

The one-particle space is laid out as reserved modes followed by n_t time cells
of h_dim modes each, all with ρ = μ. On a cell of width δ the increment is

    ΔX_k(f) = S κ^{1/2} √δ Σ_i [(CUf)_i c*_{k,i} - (C·swap·f)_i c_{k,i}],

S = (μ² + μ^-2)^{1/2}, κ = 1/(μ^-2 - μ²), so that ω(X_t(f) X_s(g)) = (s∧t) B(f, g)
with the antisymmetric form B(f, g) = ⟨Θf, C²U g⟩. The field is complex-linear in f.
"""

import logging
import os
import sys
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import sparse

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from models.araki_wyss import QuasiFreeModel, build_model, gamma, gamma_star, modular_flow, state
from spaces.filtration import Filtration
from utils.error_handlers import InvalidInputError, ensure_finite, require

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GBMSpec:
    """
    Parameters of a discretized GBM.

    C is diag(c_tilde, c_tilde) on 𝔥 = h̃⊕h̃, which commutes with Θ (swap
    composed with conjugation) and with U = 1⊕-1.
    """
    mu: float = 0.5
    n_t: int = 4
    T: float = 1.0
    h_dim: int = 2
    n_reserved: int = 0
    c_tilde: Optional[tuple] = None

    def __post_init__(self):
        require(0.0 < self.mu < 1.0, InvalidInputError, f"mu must lie in (0, 1), got {self.mu}")
        require(self.n_t >= 1, InvalidInputError, "n_t must be positive")
        require(self.T > 0, InvalidInputError, "T must be positive")
        require(self.h_dim >= 2 and self.h_dim % 2 == 0, InvalidInputError,
                f"h_dim must be even and >= 2, got {self.h_dim}")
        require(self.n_reserved >= 0, InvalidInputError, "n_reserved must be non-negative")
        if self.c_tilde is not None:
            c = np.asarray(self.c_tilde, dtype=float)
            require(c.shape == (self.h_dim // 2,) and bool(np.all(c > 0)), InvalidInputError,
                    "c_tilde must hold h_dim/2 positive entries")

    @property
    def delta(self) -> float:
        return self.T / self.n_t

    @property
    def kappa(self) -> float:
        return 1.0 / (self.mu ** -2 - self.mu ** 2)

    @property
    def field_scale(self) -> float:
        return float(np.sqrt(self.mu ** 2 + self.mu ** -2))

    @property
    def n_modes(self) -> int:
        return self.n_reserved + self.n_t * self.h_dim

    @property
    def c_diag(self) -> np.ndarray:
        half = np.ones(self.h_dim // 2) if self.c_tilde is None else np.asarray(self.c_tilde, dtype=float)
        return np.concatenate([half, half])

    @property
    def u_diag(self) -> np.ndarray:
        half = self.h_dim // 2
        return np.concatenate([np.ones(half), -np.ones(half)])

    def swap(self, f) -> np.ndarray:
        half = self.h_dim // 2
        f = np.asarray(f)
        return np.concatenate([f[half:], f[:half]])

    def theta(self, f) -> np.ndarray:
        """Θf = conj(swap f)."""
        return np.conj(self.swap(f))

    def bilinear(self, f, g) -> complex:
        """B(f, g) = ⟨Θf, C²U g⟩, complex-bilinear and antisymmetric."""
        return complex(np.sum(self.swap(np.asarray(f, dtype=np.complex128)) * self.c_diag ** 2 * self.u_diag
                              * np.asarray(g, dtype=np.complex128)))

    def bilinear_matrix(self) -> np.ndarray:
        eye = np.eye(self.h_dim)
        return np.array([[self.bilinear(eye[i], eye[j]) for j in range(self.h_dim)] for i in range(self.h_dim)])


def theta_permutation(spec: GBMSpec) -> np.ndarray:
    """
    Θ on the mode layout: 𝔥-pairing (j, j + h/2) inside every cell and on a
    leading 𝔥-copy of reserved modes, consecutive pairs on the remaining
    reserved modes, a lone last reserved mode fixed.
    """
    perm = np.arange(spec.n_modes)
    half = spec.h_dim // 2
    copy = spec.h_dim if spec.n_reserved >= spec.h_dim else 0
    for j in range(half if copy else 0):
        perm[j], perm[j + half] = j + half, j
    r = copy
    while r + 1 < spec.n_reserved:
        perm[r], perm[r + 1] = r + 1, r
        r += 2
    for k in range(spec.n_t):
        base = spec.n_reserved + k * spec.h_dim
        for j in range(half):
            perm[base + j], perm[base + j + half] = base + j + half, base + j
    return perm


class GBMProcess:
    """
    A GBM realized on its own quasi-free model.

    Per-cell increments of the standard basis vectors are built once as sparse
    matrices; fields at grid levels are sums of increments.
    """

    def __init__(self, spec: GBMSpec, cap: int = None):
        self.spec = spec
        self.model: QuasiFreeModel = build_model([spec.mu] * spec.n_modes, theta_permutation(spec), cap)
        self.filtration = Filtration(
            self.model,
            [spec.n_reserved + k * spec.h_dim for k in range(spec.n_t + 1)],
            [k * spec.delta for k in range(spec.n_t + 1)],
        )
        self.logger = logging.getLogger(__name__)
        scale = spec.field_scale * np.sqrt(spec.kappa * spec.delta)
        eye = np.eye(spec.h_dim)
        self._unit_increments: List[List[sparse.csr_matrix]] = [
            [self._cell_field(self.cell_modes(k), eye[i], scale) for i in range(spec.h_dim)]
            for k in range(spec.n_t)
        ]
        self._dense: Dict[tuple, np.ndarray] = {}
        self.logger.debug(f"GBM built: {spec.n_modes} modes, dim {self.model.dim}, delta={spec.delta}")

    def __repr__(self) -> str:
        return f"GBMProcess(mu={self.spec.mu}, n_t={self.spec.n_t}, h_dim={self.spec.h_dim}, reserved={self.spec.n_reserved})"

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def n_t(self) -> int:
        return self.spec.n_t

    def cell_modes(self, k: int) -> List[int]:
        base = self.spec.n_reserved + k * self.spec.h_dim
        return list(range(base, base + self.spec.h_dim))

    def _cell_field(self, modes: Sequence[int], f, scale: float, c_diag=None) -> sparse.csr_matrix:
        spec = self.spec
        c_diag = spec.c_diag if c_diag is None else c_diag
        created = c_diag * spec.u_diag * f
        annihilated = c_diag * spec.swap(f)
        creators = self.model.basis.mode_creators
        annihilators = self.model.basis.mode_annihilators
        out = sparse.csr_matrix((self.dim, self.dim), dtype=np.complex128)
        for m, a, b in zip(modes, created, annihilated):
            if a != 0:
                out = out + a * creators[m]
            if b != 0:
                out = out - b * annihilators[m]
        return (scale * out).tocsr()

    def check_level(self, level: int) -> int:
        if not (isinstance(level, (int, np.integer)) and 0 <= level <= self.n_t):
            raise InvalidInputError(f"time level {level} is not on the grid 0..{self.n_t}")
        return int(level)

    def level_of_time(self, t: float) -> int:
        """Grid level of a time; off-grid times are rejected."""
        k = t / self.spec.delta
        level = int(round(k))
        if abs(k - level) > 1e-9 or not 0 <= level <= self.n_t:
            raise InvalidInputError(f"time {t} is not a grid time (delta = {self.spec.delta})")
        return level

    def _vector(self, f) -> np.ndarray:
        f = ensure_finite(f, "vector in h").astype(np.complex128).ravel()
        require(f.shape == (self.spec.h_dim,), InvalidInputError,
                f"vector has length {f.shape[0]}, expected {self.spec.h_dim}")
        return f

    def unit_increment(self, k: int, i: int) -> np.ndarray:
        key = (k, i)
        if key not in self._dense:
            self._dense[key] = self._unit_increments[k][i].toarray()
        return self._dense[key]

    def increment(self, k: int, f) -> np.ndarray:
        """ΔX_k(f) = X_{t_{k+1}}(f) - X_{t_k}(f)."""
        require(0 <= k < self.n_t, InvalidInputError, f"cell {k} outside 0..{self.n_t - 1}")
        f = self._vector(f)
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for i, coefficient in enumerate(f):
            if coefficient != 0:
                out += coefficient * self.unit_increment(k, i)
        return out

    def basis_increments(self, basis) -> np.ndarray:
        """Stack of ΔX_k(v_α), shape (n_t, n_basis, dim, dim); cached per basis."""
        basis = np.asarray(basis, dtype=np.complex128)
        key = ("basis", basis.tobytes())
        if key not in self._dense:
            self._dense[key] = np.stack([np.stack([self.increment(k, v) for v in basis]) for k in range(self.n_t)])
        return self._dense[key]

    def split_increment(self, k: int, f):
        """(ΔX⁺, ΔX⁻): creation and annihilation parts, modular eigenvectors of weight ∓4."""
        spec = self.spec
        f = self._vector(f)
        scale = spec.field_scale * np.sqrt(spec.kappa * spec.delta)
        creators = self.model.basis.mode_creators
        annihilators = self.model.basis.mode_annihilators
        plus = sparse.csr_matrix((self.dim, self.dim), dtype=np.complex128)
        minus = sparse.csr_matrix((self.dim, self.dim), dtype=np.complex128)
        for m, a, b in zip(self.cell_modes(k), spec.c_diag * spec.u_diag * f, spec.c_diag * spec.swap(f)):
            plus = plus + a * creators[m]
            minus = minus - b * annihilators[m]
        return scale * plus.toarray(), scale * minus.toarray()

    def field(self, level: int, f) -> np.ndarray:
        """X_{t_level}(f)."""
        level = self.check_level(level)
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for k in range(level):
            out += self.increment(k, f)
        return out

    def field_between(self, start: int, stop: int, f) -> np.ndarray:
        """X_{s,t}(f) = X_t(f) - X_s(f) for grid levels start ≤ stop."""
        start, stop = self.check_level(start), self.check_level(stop)
        require(start <= stop, InvalidInputError, "start level exceeds stop level")
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for k in range(start, stop):
            out += self.increment(k, f)
        return out

    def embedding(self, level: int, f) -> np.ndarray:
        """𝓔_t f = κ^{1/2} √δ Σ_{k<level} e_k ⊗ CUf on the one-particle space."""
        level = self.check_level(level)
        spec = self.spec
        f = self._vector(f)
        out = np.zeros(spec.n_modes, dtype=np.complex128)
        for k in range(level):
            out[self.cell_modes(k)] = np.sqrt(spec.kappa * spec.delta) * spec.c_diag * spec.u_diag * f
        return out

    def embedding_tilde(self, level: int, f) -> np.ndarray:
        """𝓔̃_t f = -κ^{1/2} √δ Σ_{k<level} e_k ⊗ conj(C·swap·f), antilinear in f."""
        level = self.check_level(level)
        spec = self.spec
        f = self._vector(f)
        out = np.zeros(spec.n_modes, dtype=np.complex128)
        for k in range(level):
            out[self.cell_modes(k)] = -np.sqrt(spec.kappa * spec.delta) * np.conj(spec.c_diag * spec.swap(f))
        return out

    def field_from_embeddings(self, level: int, f) -> np.ndarray:
        """X_t(f) = γ*(𝓔_t f) + γ(𝓔̃_t f), built through the model's field operators."""
        return gamma_star(self.model, self.embedding(level, f)) + gamma(self.model, self.embedding_tilde(level, f))

    def reserved_pairs(self) -> List[tuple]:
        perm = self.model.theta_perm
        return [(r, int(perm[r])) for r in range(self.spec.n_reserved)]

    @cached_property
    def _reserved(self) -> List[np.ndarray]:
        spec = self.spec
        scale = spec.field_scale * np.sqrt(spec.kappa)
        perm = self.model.theta_perm
        creators = self.model.basis.mode_creators
        annihilators = self.model.basis.mode_annihilators
        out = []
        for r in range(spec.n_reserved):
            partner = int(perm[r])
            if partner == r:
                out.append(creators[r].toarray())
            elif r < partner:
                out.append((scale * (creators[r] - annihilators[partner])).toarray())
            else:
                out.append((scale * (-creators[r] - annihilators[partner])).toarray())
        return out

    def reserved_generator(self, j: int) -> np.ndarray:
        """
        Odd level-0 generator θ_j.

        Paired reserved modes (r, r') carry unit-time GBM fields of a C = 1
        pair, so ω(θ_r θ_r') = -1; a lone mode gives θ = c*_r.
        """
        require(0 <= j < self.spec.n_reserved, InvalidInputError,
                f"reserved index {j} outside 0..{self.spec.n_reserved - 1}")
        return self._reserved[j]

    def initial_field(self, v) -> np.ndarray:
        """X̃_0(v) = Σ v_i θ_i over the reserved 𝔥-copy."""
        require(self.spec.n_reserved >= self.spec.h_dim, InvalidInputError,
                "an initial field needs at least h_dim reserved modes")
        v = self._vector(v)
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for i, coefficient in enumerate(v):
            if coefficient != 0:
                out += coefficient * self._reserved[i]
        return out

    def covariance(self, level_t: int, level_s: int, f, g) -> complex:
        """(s∧t) B(f, g), the predicted ω(X_t(f) X_s(g))."""
        return min(self.check_level(level_t), self.check_level(level_s)) * self.spec.delta * self.spec.bilinear(f, g)


def build_gbm(spec: GBMSpec, cap: int = None) -> GBMProcess:
    """
    Builds a GBM on a quasi-free model with one Fock mode per (cell, 𝔥-index).

    Args:
        spec: GBM parameters.
        cap: Optional override of the dense mode cap.

    Returns:
        The process with its filtration.
    """
    return GBMProcess(spec, cap)


def gbm_field(gbm: GBMProcess, t: float, f) -> np.ndarray:
    """X_t(f) at a grid time t."""
    return gbm.field(gbm.level_of_time(t), f)


def modular_weight_defect(gbm: GBMProcess, k: int, f, tau: float) -> float:
    """Largest deviation of [ΔX^±]_τ from μ^{∓4τ}ΔX^±."""
    mu = gbm.spec.mu
    plus, minus = gbm.split_increment(k, f)
    defect_plus = np.abs(modular_flow(gbm.model, plus, tau) - mu ** (-4 * tau) * plus).max()
    defect_minus = np.abs(modular_flow(gbm.model, minus, tau) - mu ** (4 * tau) * minus).max()
    return float(max(defect_plus, defect_minus))


@dataclass
class CovarianceReport:
    """Modular covariance constants over an (r, r') grid."""
    mu: float
    rows: List[Dict[str, float]] = field(default_factory=list)

    @property
    def max_formula_defect(self) -> float:
        return max((row["formula_defect"] for row in self.rows), default=0.0)

    @property
    def max_scaling_defect(self) -> float:
        return max((row["scaling_defect"] for row in self.rows), default=0.0)


def c_prime(mu: float, r: float, r_prime: float) -> float:
    """ω([X*(f)]_r [X(f)]_r') per unit time and unit ‖Cf‖²: κ(μ^{4δ+2} + μ^{-4δ-2}), δ = r - r'."""
    kappa = 1.0 / (mu ** -2 - mu ** 2)
    shift = r - r_prime
    return kappa * (mu ** (4 * shift + 2) + mu ** (-4 * shift - 2))


def isometry_constant(mu: float, tau: float) -> float:
    """c_τ = κ(μ^{8τ} + μ^{-8τ}) in ‖T_τ^{(2)}(∫F dX(v))‖₂² = c_τ ∫‖T_τ^{(2)}(F)‖₂² ‖Cv‖²."""
    kappa = 1.0 / (mu ** -2 - mu ** 2)
    return kappa * (mu ** (8 * tau) + mu ** (-8 * tau))


def gbm_covariance_report(gbm: GBMProcess, shifts: Sequence[float] = (-0.5, -0.25, 0.0, 0.25, 0.5),
                          f=None) -> CovarianceReport:
    """
    Tabulates measured ω([X_T*(f)]_r [X_T(f)]_r') against the closed form,
    plus the deviation of the scaling c'_{r,r'} = μ^{4(r-r')} c'_{0,0}.
    """
    spec = gbm.spec
    f = np.eye(spec.h_dim)[0] if f is None else np.asarray(f, dtype=np.complex128)
    x = gbm.field(gbm.n_t, f)
    norm_cf = float(np.sum((spec.c_diag * np.abs(f)) ** 2))
    horizon = gbm.n_t * spec.delta
    c00 = c_prime(spec.mu, 0.0, 0.0)
    report = CovarianceReport(spec.mu)
    for r in shifts:
        for rp in shifts:
            measured = state(gbm.model, modular_flow(gbm.model, x.conj().T, r) @ modular_flow(gbm.model, x, rp))
            predicted = c_prime(spec.mu, r, rp) * horizon * norm_cf
            stated_scaling = spec.mu ** (4 * (r - rp)) * c00 * horizon * norm_cf
            report.rows.append({
                "r": r, "r_prime": rp, "measured": float(measured.real),
                "c_prime": c_prime(spec.mu, r, rp),
                "formula_defect": abs(measured - predicted),
                "scaling_defect": abs(measured - stated_scaling),
            })
    logger.info(f"covariance report: formula defect {report.max_formula_defect:.2e}, "
                f"stated scaling defect {report.max_scaling_defect:.2e}")
    return report

"""
Momentum-lattice diagnostics for the Wick-quartic interaction on the 2D torus.

The covariance at cutoff t is G_t(k) = χ(|k|/t)(1+|k|²)^{θ-1}. Twisted L² norms
of the quartic reduce to sums over four momenta with zero total momentum,
evaluated here as (1/N²) Σ_x F(x)⁴ with F the inverse FFT of the weight on an
N×N grid, N > 4·cutoff so that no wrapped momentum sum reaches zero.
"""

import itertools
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import gammaln

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from models.araki_wyss import QuasiFreeModel, build_model, wick, wick_gram
from spaces.lp_spaces import twisted_embed
from kernel.operator_kernel import op_norm, schatten_norm
from utils.error_handlers import AliasingError, InvalidInputError, ResourceError, require
from utils.fits import LineFit, linear_fit, loglog_fit

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.05
BRUTE_FORCE_CUTOFF = 4
MAX_TINY_MOMENTA = 3


def _plateau_piece(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    positive = x > 0
    out[positive] = np.exp(-1.0 / x[positive])
    return out


def chi(r) -> np.ndarray:
    """Smooth cutoff: 1 on [0, 1/2], 0 on [1, ∞), C^∞ in between."""
    r = np.asarray(r, dtype=float)
    up = _plateau_piece(1.0 - r)
    down = _plateau_piece(r - 0.5)
    total = up + down
    out = np.where(r <= 0.5, 1.0, 0.0)
    middle = (r > 0.5) & (r < 1.0)
    out = np.where(middle, np.divide(up, total, out=np.zeros_like(up), where=total > 0), out)
    return out


@dataclass
class LatticeSpec:
    """
    Parameters of a lattice scan.

    Args:
        theta: Regularity parameter in [0, 1/2).
        cutoffs: Cutoff values s, t used by scans.
        mode_box: Integer radius of the ℤ² truncation; the largest cutoff when omitted.
        tau: Twist parameter, recorded in scan tables.
        c_tau: Modular prefactor of the quartic norm. 1 normalizes the lattice sums;
            quartic_twist_factor(μ, τ) gives the operator-level value.
        epsilon: Young-inequality slack fixing ν = (1 - 2ε - 3θ)/(1 + ε).
    """
    theta: float = 0.1
    cutoffs: Tuple[float, ...] = (8, 16, 32, 64, 128)
    mode_box: Optional[int] = None
    tau: float = 0.0
    c_tau: float = 1.0
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        require(0.0 <= self.theta < 0.5, InvalidInputError, f"theta must lie in [0, 1/2), got {self.theta}")
        require(self.epsilon > 0, InvalidInputError, "epsilon must be positive")
        if self.mode_box is None:
            self.mode_box = int(np.ceil(max(self.cutoffs))) if self.cutoffs else 1
        require(self.mode_box >= max(self.cutoffs, default=0), InvalidInputError,
                f"mode_box {self.mode_box} is smaller than the largest cutoff")

    @property
    def nu(self) -> float:
        return (1.0 - 2.0 * self.epsilon - 3.0 * self.theta) / (1.0 + self.epsilon)


def momentum_grid(radius: int) -> Tuple[np.ndarray, np.ndarray]:
    k = np.arange(-radius, radius + 1)
    return np.meshgrid(k, k, indexing='ij')


def cutoff_profile(t: float, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    """χ(|k|/t), with t = 0 read as the indicator of k = 0."""
    norm = np.sqrt(kx ** 2 + ky ** 2)
    if t == 0:
        return (norm == 0).astype(float)
    return chi(norm / t)


def propagator(theta: float, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    return (1.0 + kx ** 2 + ky ** 2) ** (theta - 1.0)


def covariance_sum(theta: float, t: float) -> float:
    """
    C_t = Σ_{k∈ℤ²} χ(|k|/t)(1+|k|²)^{θ-1}.

    Args:
        theta: Regularity parameter.
        t: Non-negative cutoff.

    Returns:
        The covariance at coinciding points.
    """
    require(t >= 0, InvalidInputError, f"cutoff must be non-negative, got {t}")
    kx, ky = momentum_grid(int(np.ceil(t)))
    return float(np.sum(cutoff_profile(t, kx, ky) * propagator(theta, kx, ky)))


@dataclass
class ExponentFit:
    exponent: float
    fit: LineFit
    logarithmic: bool = False
    expected: Optional[float] = None


def covariance_exponent(theta: float, cutoffs: Sequence[float] = (8, 16, 32, 64, 128)) -> ExponentFit:
    """
    Growth exponent of C_t from the increments C_{t_{i+1}} - C_{t_i} on a dyadic ladder.

    At θ = 0 the growth is logarithmic; the fit is then C_t against log t and
    the reported exponent is 0.
    """
    cutoffs = sorted(cutoffs)
    values = np.array([covariance_sum(theta, t) for t in cutoffs])
    if theta == 0:
        fit = linear_fit(np.log(cutoffs), values)
        return ExponentFit(0.0, fit, logarithmic=True, expected=0.0)
    increments = np.diff(values)
    fit = loglog_fit(cutoffs[:-1], increments)
    return ExponentFit(fit.slope, fit, expected=2.0 * theta)


def lattice_weight(theta: float, t: float, radius: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """G_t(k) on the box |k_x|, |k_y| ≤ radius, with the momentum grids."""
    radius = int(np.ceil(t)) if radius is None else radius
    kx, ky = momentum_grid(radius)
    return kx, ky, cutoff_profile(t, kx, ky) * propagator(theta, kx, ky)


def grid_size(radius: int) -> int:
    return int(2 ** np.ceil(np.log2(4 * radius + 2)))


def quartic_shell_sum(kx: np.ndarray, ky: np.ndarray, weight: np.ndarray, grid: Optional[int] = None) -> float:
    """
    Σ_{k_1+k_2+k_3+k_4=0} Π_i weight(k_i) by FFT on an N×N torus.

    Raises:
        AliasingError: If N does not exceed four times the box radius.
    """
    radius = int(np.max(np.abs(kx))) if kx.size else 0
    size = grid_size(radius) if grid is None else int(grid)
    if size <= 4 * radius:
        raise AliasingError(f"grid {size} aliases momentum sums on a box of radius {radius} (needs > {4 * radius})")
    table = np.zeros((size, size))
    table[kx % size, ky % size] = weight
    profile = np.fft.ifft2(table, norm='forward')
    return float(np.real(np.sum(profile ** 4)) / size ** 2)


def quartic_shell_sum_brute(kx: np.ndarray, ky: np.ndarray, weight: np.ndarray) -> float:
    """Direct sum over k_1, k_2, k_3 with k_4 = -(k_1+k_2+k_3)."""
    radius = int(np.max(np.abs(kx))) if kx.size else 0
    require(radius <= BRUTE_FORCE_CUTOFF, ResourceError, f"brute force limited to radius {BRUTE_FORCE_CUTOFF}")
    points = [(int(a), int(b), float(w)) for a, b, w in zip(kx.ravel(), ky.ravel(), weight.ravel()) if w != 0]
    lookup = {(a, b): w for a, b, w in points}
    total = 0.0
    for (a1, b1, w1), (a2, b2, w2), (a3, b3, w3) in itertools.product(points, repeat=3):
        w4 = lookup.get((-(a1 + a2 + a3), -(b1 + b2 + b3)))
        if w4:
            total += w1 * w2 * w3 * w4
    return total


def v_l2_norm_sq(spec: LatticeSpec, t: float, grid: Optional[int] = None) -> float:
    """‖T_τ^{(2)}(V_t)‖₂² = C_τ Σ_{Σk=0} Π_i G_t(k_i)."""
    require(t >= 0, InvalidInputError, f"cutoff must be non-negative, got {t}")
    kx, ky, weight = lattice_weight(spec.theta, t)
    return spec.c_tau * quartic_shell_sum(kx, ky, weight, grid)


def v_l2_difference(spec: LatticeSpec, s: float, t: float, grid: Optional[int] = None,
                    brute_force: bool = False) -> float:
    """
    ‖T_τ^{(2)}(V_t - V_s)‖₂² = C_τ Σ_{Σk=0} (Π_i χ(|k_i|/t) - Π_i χ(|k_i|/s)) Π_i (1+|k_i|²)^{θ-1}.

    The momentum shells are orthogonal, so this equals
    ‖T(V_t)‖₂² - ‖T(V_s)‖₂² and is non-negative for s ≤ t.

    Args:
        spec: Lattice parameters.
        s: Lower cutoff.
        t: Upper cutoff.
        grid: FFT grid size; the next power of two above 4·t when omitted.
        brute_force: Evaluate the shell sums directly (cutoff ≤ 4 only).

    Returns:
        The squared difference norm.
    """
    require(0 <= s <= t, InvalidInputError, f"need 0 <= s <= t, got s={s}, t={t}")
    require(t <= spec.mode_box, InvalidInputError, f"cutoff {t} exceeds mode_box {spec.mode_box}")
    if s == t:
        return 0.0
    radius = int(np.ceil(t))
    kx, ky, upper = lattice_weight(spec.theta, t, radius)
    _, _, lower = lattice_weight(spec.theta, s, radius)
    if brute_force:
        sums = [quartic_shell_sum_brute(kx, ky, w) for w in (upper, lower)]
    else:
        sums = [quartic_shell_sum(kx, ky, w, grid) for w in (upper, lower)]
    return spec.c_tau * (sums[0] - sums[1])


def difference_decay(spec: LatticeSpec, cutoffs: Optional[Sequence[float]] = None) -> ExponentFit:
    """
    Decay exponent of ‖T(V_{2s} - V_s)‖₂² in s; power counting gives 8θ - 2.
    """
    cutoffs = sorted(spec.cutoffs if cutoffs is None else cutoffs)
    local = replace(spec, mode_box=int(np.ceil(2 * max(cutoffs))))
    values = [v_l2_difference(local, s, 2 * s) for s in cutoffs]
    fit = loglog_fit(cutoffs, values)
    logger.info(f"difference decay theta={spec.theta}: slope {fit.slope:.3f} (power counting {8 * spec.theta - 2:.3f}, "
                f"-2ν = {-2 * spec.nu:.3f})")
    return ExponentFit(fit.slope, fit, expected=8.0 * spec.theta - 2.0)


def calibrate_constant(spec: LatticeSpec, cutoffs: Optional[Sequence[float]] = None) -> float:
    """c in ‖T(V_{2s} - V_s)‖₂ ≈ c·s^{-ν}, from the fitted prefactor of the squared difference."""
    decay = difference_decay(spec, cutoffs)
    return float(np.exp(0.5 * decay.fit.intercept))


def growth_exponent(theta: float, nu: float) -> float:
    return 8.0 * theta / (4.0 * theta + nu)


@dataclass
class GrowthBound:
    bound: float
    s_opt: float
    exponent: float
    logarithmic: bool = False


def v_lp_growth(spec: LatticeSpec, p: float, c: float = 1.0) -> GrowthBound:
    """
    min_s s^{4θ} + c·(p/2)²·s^{-ν}, with the minimizer s = (ν c (p/2)²/(4θ))^{1/(4θ+ν)}.

    The factor (p/2)² is the hypercontractive growth normalized to 1 at p = 2.
    """
    require(p >= 2, InvalidInputError, f"p must be at least 2, got {p}")
    nu = spec.nu
    require(nu > 0, InvalidInputError, f"nu = {nu} is not positive for theta={spec.theta}, epsilon={spec.epsilon}")
    factor = c * (p / 2.0) ** 2
    if spec.theta == 0:
        return GrowthBound(1.0, np.inf, 0.0, logarithmic=True)
    s_opt = (nu * factor / (4.0 * spec.theta)) ** (1.0 / (4.0 * spec.theta + nu))
    bound = s_opt ** (4.0 * spec.theta) + factor * s_opt ** (-nu)
    return GrowthBound(float(bound), float(s_opt), growth_exponent(spec.theta, nu))


def growth_table(spec: LatticeSpec, ps: Sequence[float] = (2, 4, 8, 16), c: float = 1.0) -> Tuple[pd.DataFrame, LineFit]:
    rows = []
    for p in ps:
        result = v_lp_growth(spec, p, c)
        rows.append({"p": p, "bound": result.bound, "s_opt": result.s_opt, "exponent": result.exponent})
    table = pd.DataFrame(rows, columns=["p", "bound", "s_opt", "exponent"])
    fit = loglog_fit(table["p"], table["bound"]) if spec.theta > 0 else linear_fit(np.log(table["p"]), table["bound"])
    return table, fit


@dataclass
class PartitionSeries:
    total: float
    converged: bool
    lambda_star: float
    terms: int
    hypothesis_holds: bool


def partition_series(spec: LatticeSpec, lam: float, p: float, c: float = 1.0, max_terms: int = 400,
                     tol: float = 1e-16) -> PartitionSeries:
    """
    Σ_n |λ|^n c^n (pn)^{a n} / n! with a = 8θ/(4θ+ν), summed in log space.

    Args:
        spec: Lattice parameters.
        lam: Coupling λ.
        p: Exponent of the norm bounded.
        c: Growth constant.
        max_terms: Cap on the number of terms.
        tol: Relative size below which a decreasing tail is dropped.

    Returns:
        PartitionSeries; lambda_star is infinite for a < 1.
    """
    a = growth_exponent(spec.theta, spec.nu)
    hypothesis = 7.0 * spec.theta < 1.0
    if not hypothesis:
        logger.warning(f"theta={spec.theta} violates 7θ < 1; the series bound is not expected to converge")
    if lam == 0:
        return PartitionSeries(1.0, True, np.inf if a < 1 else 0.0, 1, hypothesis)
    n = np.arange(1, max_terms + 1)
    log_terms = n * np.log(abs(lam) * c) + a * n * np.log(p * n) - gammaln(n + 1)
    log_terms = np.concatenate([[0.0], log_terms])
    peak = log_terms.max()
    total = float(np.exp(peak) * np.sum(np.exp(log_terms - peak)))
    tail_small = log_terms[-1] - np.log(total) < np.log(tol)
    decreasing = log_terms[-1] < log_terms[-2]
    converged = bool(tail_small and decreasing and a < 1)
    if a < 1:
        lambda_star = np.inf
    elif a == 1:
        lambda_star = 1.0 / (c * p * np.e)
    else:
        lambda_star = 0.0
    significant = int(np.count_nonzero(log_terms - np.log(total) >= np.log(tol)))
    return PartitionSeries(total, converged, lambda_star, significant, hypothesis)


def partition_linear_fit(spec: LatticeSpec, lams: Sequence[float] = (0.01, 0.02, 0.05, 0.1), p: float = 2.0,
                         c: float = 1.0) -> Tuple[np.ndarray, LineFit]:
    """Tail (series - 1)/|λ| over small couplings and the log-log slope of the tail, close to 1."""
    tails = np.array([partition_series(spec, lam, p, c).total - 1.0 for lam in lams])
    return tails / np.asarray(lams), loglog_fit(lams, tails)


def phi4_scan(spec: LatticeSpec, thetas: Sequence[float], taus: Sequence[float] = (0.0,)) -> pd.DataFrame:
    """Rows (theta, tau, s, t, value) of ‖T(V_t - V_s)‖₂² over consecutive cutoffs."""
    rows = []
    cutoffs = sorted(spec.cutoffs)
    for theta in thetas:
        for tau in taus:
            local = replace(spec, theta=theta, tau=tau, cutoffs=tuple(cutoffs))
            for s, t in zip(cutoffs, cutoffs[1:]):
                rows.append({"theta": theta, "tau": tau, "s": s, "t": t, "value": v_l2_difference(local, s, t)})
    return pd.DataFrame(rows, columns=["theta", "tau", "s", "t", "value"])


def mode_weight(k: Tuple[int, int], theta: float, t: float) -> float:
    """G_t(k) at a single momentum."""
    kx, ky = np.array([k[0]]), np.array([k[1]])
    return float((cutoff_profile(t, kx, ky) * propagator(theta, kx, ky))[0])


def _check_mode_set(momenta: Sequence[Tuple[int, int]], spins: int) -> List[Tuple[int, int]]:
    momenta = [tuple(int(c) for c in k) for k in momenta]
    require(1 <= len(momenta) <= MAX_TINY_MOMENTA, InvalidInputError,
            f"between 1 and {MAX_TINY_MOMENTA} momenta are supported")
    require(len(set(momenta)) == len(momenta), InvalidInputError, "momenta must be distinct")
    require(spins >= 1, InvalidInputError, "at least one spin component is required")
    return momenta


def quartic_terms(momenta: Sequence[Tuple[int, int]], spins: int) -> Iterator[List[Tuple[Tuple[int, int], int, bool]]]:
    """
    Legs (k, spin, barred) of Ψ̄_σ(k_1)Ψ_σ(k_2)Ψ̄_ρ(k_3)Ψ_ρ(k_4) with -k_1+k_2-k_3+k_4 = 0.
    """
    for sigma, rho_spin in itertools.product(range(spins), repeat=2):
        for k1, k2, k3, k4 in itertools.product(momenta, repeat=4):
            if any(-a + b - c + e for a, b, c, e in zip(k1, k2, k3, k4)):
                continue
            yield [(k1, sigma, True), (k2, sigma, False), (k3, rho_spin, True), (k4, rho_spin, False)]


def quartic_twist_factor(mu: float, tau: float) -> float:
    """
    C_τ for a uniform ρ = μ.

    Under ω(·* [·]_{1/2+2τ}) a Ψ̄ leg carries G·μ^{4τ'-4} and a Ψ leg G·μ^{-4τ'},
    τ' = 1/2 + 2τ. A quartet has two of each, so the twist cancels and C_τ = μ^{-8}.
    """
    shift = 0.5 + 2.0 * tau
    return float((mu ** (4.0 * shift - 4.0)) ** 2 * (mu ** (-4.0 * shift)) ** 2)


def restricted_quartic_sum(momenta: Sequence[Tuple[int, int]], spins: int = 2, theta: float = 0.1, t: float = 2.0,
                           mu: float = 0.5, tau: float = 0.0) -> float:
    """
    The lattice formula for ‖T_τ^{(2)}(V)‖₂² restricted to a finite mode set.

    Leg vectors are orthogonal with squared norms G_t(k), so the wedge inner
    product of two quartets is the sign of the permutation matching their legs
    times Π G_t(k_i), and zero when a quartet repeats a leg. Grouping quartets
    by leg set gives C_τ Σ_S (Σ signs)² Π_{legs in S} G_t(k).

    Args:
        momenta: At most three distinct lattice momenta.
        spins: Spin components per momentum.
        theta: Regularity parameter.
        t: Cutoff entering G_t.
        mu: Value of ρ on every mode.
        tau: Twist parameter.

    Returns:
        The squared twisted L² norm predicted from momenta alone.
    """
    momenta = _check_mode_set(momenta, spins)
    amplitudes: Dict[Tuple, int] = {}
    for legs in quartic_terms(momenta, spins):
        if len(set(legs)) < len(legs):
            continue
        order = sorted(range(len(legs)), key=lambda i: legs[i])
        inversions = sum(1 for i, j in itertools.combinations(range(len(order)), 2) if order[i] > order[j])
        key = tuple(legs[i] for i in order)
        amplitudes[key] = amplitudes.get(key, 0) + (-1) ** inversions
    total = 0.0
    for key, amplitude in amplitudes.items():
        if amplitude:
            total += amplitude ** 2 * float(np.prod([mode_weight(k, theta, t) for k, _, _ in key]))
    return quartic_twist_factor(mu, tau) * total


@dataclass
class TinyCutoffV:
    """Operator-level quartic on a handful of momenta and its Wick expansion."""
    model: QuasiFreeModel
    V: np.ndarray
    terms: List[Tuple[complex, List[np.ndarray]]] = field(default_factory=list)
    labels: List[Tuple[Tuple[int, int], int]] = field(default_factory=list)
    psi_legs: List[np.ndarray] = field(default_factory=list)
    psi_bar_legs: List[np.ndarray] = field(default_factory=list)

    def l2_norm_sq(self, tau: float = 0.0) -> float:
        """‖T_τ^{(2)}(V)‖₂² from the operator."""
        return schatten_norm(twisted_embed(self.model, self.V, 2.0, tau), 2.0) ** 2

    def l2_norm_sq_wick(self, tau: float = 0.0) -> float:
        """The same norm from Wick Gram determinants, ω(V*[V]_{1/2+2τ})."""
        total = 0.0
        for ca, fa in self.terms:
            for cb, fb in self.terms:
                total += np.conj(ca) * cb * wick_gram(self.model, fa, fb, 0.5 + 2.0 * tau)
        return float(np.real(total))

    def sup_norm(self) -> float:
        return op_norm(self.V)


def tiny_cutoff_V(momenta: Sequence[Tuple[int, int]], spins: int = 2, mu: float = 0.5, t: float = 2.0,
                  theta: float = 0.1, cap: int = None) -> TinyCutoffV:
    """
    V = Σ_{σ,ρ} Σ_{-k_1+k_2-k_3+k_4=0} ⟦Ψ̄_σ(k_1)Ψ_σ(k_2)Ψ̄_ρ(k_3)Ψ_ρ(k_4)⟧ on a finite mode set.

    Ψ_σ(k) = β(√G_t(k) e_{kσ} ⊕ 0) = γ*(ρ^{-1}√G e_{kσ}) and Ψ̄ = Ψ*, which is
    β(0 ⊕ ρ^{-2}√G e_{kσ}) for the conjugation fixing the mode basis.

    Args:
        momenta: At most three distinct lattice momenta.
        spins: Spin components per momentum.
        mu: Value of ρ on every mode.
        t: Cutoff entering G_t.
        theta: Regularity parameter.
        cap: Optional override of the dense mode cap.

    Returns:
        TinyCutoffV with the operator, its Wick terms and the leg vectors.
    """
    momenta = _check_mode_set(momenta, spins)
    labels = [(k, sigma) for k in momenta for sigma in range(spins)]
    d = len(labels)
    model = build_model([mu] * d, None, cap)
    index = {label: n for n, label in enumerate(labels)}

    psi_legs, psi_bar_legs = [], []
    for n, (k, _) in enumerate(labels):
        amplitude = np.sqrt(mode_weight(k, theta, t))
        psi, psi_bar = np.zeros(2 * d, dtype=np.complex128), np.zeros(2 * d, dtype=np.complex128)
        psi[n] = amplitude
        psi_bar[d + n] = amplitude / model.rho[n] ** 2
        psi_legs.append(psi)
        psi_bar_legs.append(psi_bar)

    terms = []
    V = np.zeros((model.dim, model.dim), dtype=np.complex128)
    for quartet in quartic_terms(momenta, spins):
        legs = [(psi_bar_legs if barred else psi_legs)[index[(k, sigma)]] for k, sigma, barred in quartet]
        if any(not np.any(leg) for leg in legs):
            continue
        monomial = wick(model, legs)
        if not np.any(monomial):
            continue
        V += monomial
        terms.append((1.0, legs))
    logger.debug(f"tiny cutoff V: {d} modes, {len(terms)} Wick terms")
    return TinyCutoffV(model, V, terms, labels, psi_legs, psi_bar_legs)

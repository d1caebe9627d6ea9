"""
Filtrations of the quasi-free model by prefixes of Fock modes.

Level j of a filtration is the subalgebra generated by the lowest k_j modes.
With low modes first in the occupation bitmask, that subalgebra is
1_high ⊗ M(2^{k_j}) and the state-preserving conditional expectation is the
slice map x ↦ 1_high ⊗ Tr_high[(W_high ⊗ 1) x]. Truncating the Wick expansion
to legs inside the prefix gives the same projection and is kept as a
cross-check.
"""

import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import psd_sqrt, schatten_norm
from models.araki_wyss import QuasiFreeModel
from spaces.lp_spaces import tau_grid, twisted_embed
from utils.error_handlers import AdaptednessError, InvalidInputError, UnsupportedExponentError, require

logger = logging.getLogger(__name__)


class Filtration:
    """
    Nested prefix subalgebras over a time grid.

    Args:
        model: The quasi-free model. Its Θ must map every prefix into itself.
        level_modes: Non-decreasing number of modes generating each level.
        times: Grid times t_0 < t_1 < ... of the levels; 0, 1, 2, ... when omitted.
    """

    def __init__(self, model: QuasiFreeModel, level_modes: Sequence[int], times: Optional[Sequence[float]] = None):
        level_modes = [int(k) for k in level_modes]
        require(len(level_modes) >= 1, InvalidInputError, "a filtration needs at least one level")
        require(all(0 <= k <= model.d for k in level_modes), InvalidInputError, "level sizes exceed the mode count")
        require(all(a <= b for a, b in zip(level_modes, level_modes[1:])), InvalidInputError,
                "levels must be nested")
        for k in level_modes:
            require(all(model.theta_perm[i] < k for i in range(k)), InvalidInputError,
                    f"prefix of {k} modes is not Θ-invariant")
        times = list(range(len(level_modes))) if times is None else [float(t) for t in times]
        require(len(times) == len(level_modes), InvalidInputError, "one time per level is required")
        require(all(a < b for a, b in zip(times, times[1:])), InvalidInputError, "times must increase")

        self.model = model
        self.level_modes = level_modes
        self.times = times
        self._wick_masks: Dict[int, np.ndarray] = {}

    @property
    def n_levels(self) -> int:
        return len(self.level_modes)

    def _check_level(self, level: int) -> int:
        require(0 <= level < self.n_levels, InvalidInputError, f"level {level} outside 0..{self.n_levels - 1}")
        return level

    def embed_low(self, a_low, level: int) -> np.ndarray:
        """1_high ⊗ a_low for an operator on the first k_level modes."""
        k = self.level_modes[self._check_level(level)]
        high = 2 ** (self.model.d - k)
        return np.kron(np.eye(high), np.asarray(a_low, dtype=np.complex128))

    def level_dim(self, level: int) -> int:
        return 2 ** self.level_modes[self._check_level(level)]

    def wick_mask(self, level: int) -> np.ndarray:
        """Boolean mask over the Wick basis: monomials whose legs all touch prefix modes."""
        k = self.level_modes[self._check_level(level)]
        if k not in self._wick_masks:
            basis = self.model.wick_basis
            self._wick_masks[k] = np.array([all(self.model.leg_mode(leg) < k for leg in legs) for legs in basis.legs])
        return self._wick_masks[k]

    def cond_exp(self, x, level: int, method: str = "slice") -> np.ndarray:
        """
        The ω-preserving conditional expectation onto level `level`.

        Args:
            x: Algebra element.
            level: Filtration level.
            method: "slice" (partial trace) or "wick" (Wick truncation).

        Returns:
            ω_level(x).
        """
        x = np.asarray(x, dtype=np.complex128)
        self._check_level(level)
        if method == "wick":
            basis = self.model.wick_basis
            return basis.recompose(basis.decompose(x) * self.wick_mask(level))
        if method != "slice":
            raise InvalidInputError(f"unknown conditional-expectation method '{method}'")

        k = self.level_modes[level]
        low = 2 ** k
        high = self.model.dim // low
        high_weights = self.model.weights.reshape(high, low)[:, 0]
        high_weights = high_weights / high_weights.sum()
        x4 = x.reshape(high, low, high, low)
        a_low = np.einsum('h,hlhm->lm', high_weights, x4)
        return np.kron(np.eye(high), a_low)

    def is_adapted(self, x, level: int, tol: float = 1e-10) -> bool:
        x = np.asarray(x)
        return float(np.abs(self.cond_exp(x, level) - x).max()) <= tol * max(1.0, float(np.abs(x).max()))

    def cond_exp_lp(self, a, level: int, p: float, tau: float = 0.0) -> np.ndarray:
        """
        ω^{(p)}(W^{1/2p+τ} x W^{1/2p-τ}) = W^{1/2p+τ} ω(x) W^{1/2p-τ}.
        """
        half = 0.0 if np.isinf(p) else 0.5 / p
        x = self.model.sandwich(np.asarray(a, dtype=np.complex128), -(half + tau), -(half - tau))
        return self.model.sandwich(self.cond_exp(x, level), half + tau, half - tau)


def cond_exp(filtration: Filtration, x, level: int) -> np.ndarray:
    return filtration.cond_exp(x, level)


def cond_exp_lp(filtration: Filtration, a, level: int, p: float, tau: float = 0.0) -> np.ndarray:
    return filtration.cond_exp_lp(a, level, p, tau)


@dataclass
class MartingaleSequence:
    """L^p representatives x_0..x_N of a martingale, one per filtration level."""
    values: List[np.ndarray]
    p: float

    def differences(self) -> List[np.ndarray]:
        return [self.values[0]] + [b - a for a, b in zip(self.values, self.values[1:])]

    def norms(self) -> List[float]:
        return [schatten_norm(v, self.p) for v in self.values]


def martingale_from_terminal(filtration: Filtration, x_terminal, p: float, tau: float = 0.0) -> MartingaleSequence:
    """
    x_j = ω_j^{(p)}(x_terminal) for every level.

    Args:
        filtration: The filtration.
        x_terminal: L^p representative at the top level.
        p: Exponent in (1, inf).
        tau: Twist of the representative.

    Returns:
        The martingale, ending at x_terminal exactly when the top level is the whole algebra.
    """
    require(1 < p < np.inf, InvalidInputError, f"martingale exponent must lie in (1, inf), got {p}")
    values = [filtration.cond_exp_lp(x_terminal, j, p, tau) for j in range(filtration.n_levels)]
    return MartingaleSequence(values, p)


def column_square(ops: Sequence[np.ndarray], weights: Optional[Sequence[float]] = None) -> np.ndarray:
    weights = np.ones(len(ops)) if weights is None else np.asarray(weights, dtype=float)
    total = np.zeros_like(ops[0])
    for w, a in zip(weights, ops):
        total = total + w * (a.conj().T @ a)
    return total


def row_square(ops: Sequence[np.ndarray], weights: Optional[Sequence[float]] = None) -> np.ndarray:
    return column_square([a.conj().T for a in ops], weights)


@dataclass
class HardyNorms:
    Hc: float
    Hr: float
    hd: float
    hc: Optional[float] = None
    hr: Optional[float] = None

    @property
    def h_norm(self) -> Optional[float]:
        if self.hc is None:
            return None
        return max(self.hc, self.hr, self.hd)

    @property
    def H_norm(self) -> float:
        return max(self.Hc, self.Hr)


def hardy_norms(filtration: Filtration, diffs: Sequence[np.ndarray], p: float, conditioned: bool = True) -> HardyNorms:
    """
    Square-function norms of a martingale difference sequence in L^p.

    Hc/Hr use (Σ d*d)^{1/2} and (Σ dd*)^{1/2}; hc/hr condition each square on the
    previous level (level -1 read as level 0) through ω^{(p/2)}; hd = (Σ‖d‖_p^p)^{1/p}.

    Args:
        filtration: Filtration whose levels index the differences.
        diffs: L^p representatives d_0..d_n.
        p: Exponent ≥ 1 (≥ 2 when conditioned norms are requested).
        conditioned: Whether to compute hc and hr.

    Returns:
        HardyNorms record.
    """
    require(p >= 1, UnsupportedExponentError, f"Hardy norms need p >= 1, got {p}")
    diffs = [np.asarray(d, dtype=np.complex128) for d in diffs]
    if not diffs:
        return HardyNorms(0.0, 0.0, 0.0, 0.0 if conditioned else None, 0.0 if conditioned else None)
    Hc = schatten_norm(psd_sqrt(column_square(diffs)), p)
    Hr = schatten_norm(psd_sqrt(row_square(diffs)), p)
    hd = float(sum(schatten_norm(d, p) ** p for d in diffs) ** (1.0 / p))
    if not conditioned:
        return HardyNorms(Hc, Hr, hd)
    if p < 2:
        raise UnsupportedExponentError(f"conditioned square functions need p >= 2, got {p}")
    col = np.zeros_like(diffs[0])
    row = np.zeros_like(diffs[0])
    for k, d in enumerate(diffs):
        level = max(k - 1, 0)
        col = col + filtration.cond_exp_lp(d.conj().T @ d, level, p / 2)
        row = row + filtration.cond_exp_lp(d @ d.conj().T, level, p / 2)
    hc = schatten_norm(psd_sqrt(col), p)
    hr = schatten_norm(psd_sqrt(row), p)
    return HardyNorms(Hc, Hr, hd, hc, hr)


class AdaptedSimpleProcess:
    """
    Piecewise-constant process on a filtration grid.

    Values live on the intervals [t_{b_i}, t_{b_{i+1}}) between consecutive
    breakpoints. Scalar processes store one operator per interval; indexed
    processes store, per interval, one operator for each vector of a fixed
    real basis of the one-particle space (shape (n_intervals, n_basis, D, D)).
    """

    def __init__(self, breakpoints: Sequence[int], values, indexed: bool = False, parity: str = "mixed"):
        breakpoints = [int(b) for b in breakpoints]
        values = np.asarray(values, dtype=np.complex128)
        require(len(breakpoints) >= 2, InvalidInputError, "a simple process needs at least two breakpoints")
        require(all(a < b for a, b in zip(breakpoints, breakpoints[1:])), InvalidInputError,
                "breakpoints must increase")
        require(values.shape[0] == len(breakpoints) - 1, InvalidInputError, "one value per interval is required")
        require(values.ndim == (4 if indexed else 3), InvalidInputError, "values have the wrong rank")
        require(parity in ("even", "odd", "mixed"), InvalidInputError, f"unknown parity tag '{parity}'")
        self.breakpoints = breakpoints
        self.values = values
        self.indexed = indexed
        self.parity = parity

    @property
    def n_intervals(self) -> int:
        return len(self.breakpoints) - 1

    def interval_of(self, level: int) -> int:
        require(self.breakpoints[0] <= level < self.breakpoints[-1], InvalidInputError,
                f"level {level} outside the process support")
        return int(np.searchsorted(self.breakpoints, level, side='right') - 1)

    def value_at(self, level: int) -> np.ndarray:
        """Value on the grid cell [t_level, t_{level+1})."""
        return self.values[self.interval_of(level)]

    def check_adapted(self, filtration: Filtration, tol: float = 1e-10) -> None:
        for i, start in enumerate(self.breakpoints[:-1]):
            ops = self.values[i] if self.indexed else [self.values[i]]
            for op in ops:
                if not filtration.is_adapted(op, start, tol):
                    raise AdaptednessError(f"value on interval {i} is not measurable at level {start}")

    def refine(self, levels: Sequence[int]) -> "AdaptedSimpleProcess":
        """Same process with breakpoints on every listed level."""
        levels = sorted(set(levels) | set(self.breakpoints))
        levels = [b for b in levels if self.breakpoints[0] <= b <= self.breakpoints[-1]]
        return AdaptedSimpleProcess(levels, [self.value_at(b) for b in levels[:-1]], self.indexed, self.parity)

    def __sub__(self, other: "AdaptedSimpleProcess") -> "AdaptedSimpleProcess":
        levels = sorted(set(self.breakpoints) | set(other.breakpoints))
        a, b = self.refine(levels), other.refine(levels)
        return AdaptedSimpleProcess(levels, a.values - b.values, self.indexed, "mixed")


def q_sigma(filtration: Filtration, process: AdaptedSimpleProcess, sigma: Sequence[int]) -> AdaptedSimpleProcess:
    """
    Averaged conditional expectation onto a coarser subdivision σ:
    (Q_σF)(t) = Σ ω_{σ_k}(F_j)(s_{j+1} - s_j)/(σ_{k+1} - σ_k) for σ_k ≤ t < σ_{k+1},
    the sum running over the cells of F inside [σ_k, σ_{k+1}).

    Args:
        filtration: Filtration supplying the times and conditional expectations.
        process: Simple process; its breakpoints must refine σ.
        sigma: Increasing filtration levels covering the process support.

    Returns:
        Q_σ F, piecewise constant on σ.
    """
    sigma = [int(s) for s in sigma]
    require(sigma[0] == process.breakpoints[0] and sigma[-1] == process.breakpoints[-1], InvalidInputError,
            "sigma must cover the process support")
    require(set(sigma) <= set(range(filtration.n_levels)), InvalidInputError, "sigma is not on the filtration grid")
    fine = process.refine(sigma)
    times = filtration.times
    new_values = []
    for start, stop in zip(sigma, sigma[1:]):
        width = times[stop] - times[start]
        total = np.zeros_like(fine.values[0])
        for i, (a, b) in enumerate(zip(fine.breakpoints, fine.breakpoints[1:])):
            if start <= a and b <= stop:
                weight = (times[b] - times[a]) / width
                if process.indexed:
                    total = total + weight * np.stack([filtration.cond_exp(v, start) for v in fine.values[i]])
                else:
                    total = total + weight * filtration.cond_exp(fine.values[i], start)
        new_values.append(total)
    return AdaptedSimpleProcess(sigma, new_values, process.indexed, process.parity)


def column_hardy_norm(filtration: Filtration, process: AdaptedSimpleProcess, p: float,
                      pairing: Optional[np.ndarray] = None, row: bool = False, tau_points: int = 5) -> float:
    """
    sup_τ ‖(∫|T_τ^{(p)}(F_s)|² ds)^{1/2}‖_p for a simple process.

    For indexed processes the square is |F|²_A = Σ_{αβ} M_{αβ} F(v_α)* F(v_β)
    with M the pairing matrix of a positive A (identity when omitted).
    """
    times = filtration.times
    best = 0.0
    for tau in tau_grid(p, tau_points):
        total = None
        for i, (a, b) in enumerate(zip(process.breakpoints, process.breakpoints[1:])):
            width = times[b] - times[a]
            ops = process.values[i] if process.indexed else [process.values[i]]
            embedded = [twisted_embed(filtration.model, op, p, tau) for op in ops]
            if row:
                embedded = [e.conj().T for e in embedded]
            m = np.eye(len(embedded)) if pairing is None else pairing
            square = sum(m[al, be] * embedded[al].conj().T @ embedded[be]
                         for al in range(len(embedded)) for be in range(len(embedded)) if m[al, be] != 0)
            total = width * square if total is None else total + width * square
        best = max(best, schatten_norm(psd_sqrt(total), p))
    return best

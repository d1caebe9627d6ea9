"""
Polynomials in anticommuting (odd) and commuting (even) variables.

A monomial is a strictly increasing tuple of anti indices followed by a sorted
multiset of sym indices, evaluated as Z_-(a_1)⋯Z_-(a_m)·Z_+(s_1)⋯Z_+(s_l).
Derivatives act from the left: ∂^a_w removes w from the anti tuple with sign
(-1)^(its position), ∂^c_w lowers the multiplicity of w.
"""

import logging
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from utils.error_handlers import InvalidInputError, ParityError, require

logger = logging.getLogger(__name__)

Monomial = Tuple[Tuple[int, ...], Tuple[int, ...]]

PARITY_TOL = 1e-10


def _sort_anti(indices: Sequence[int]) -> Tuple[int, Optional[Tuple[int, ...]]]:
    """Sign of the sorting permutation and the sorted tuple; None when an index repeats."""
    indices = list(indices)
    if len(set(indices)) != len(indices):
        return 0, None
    sign = 1
    for i in range(len(indices)):
        for j in range(i + 1, len(indices)):
            if indices[i] > indices[j]:
                sign = -sign
    return sign, tuple(sorted(indices))


class GrassmannPolynomial:
    """
    Finite sum of coefficient·monomial over n_anti odd and n_sym even variables.
    """

    def __init__(self, n_anti: int, n_sym: int = 0, terms: Optional[Dict[Monomial, complex]] = None):
        require(n_anti >= 0 and n_sym >= 0, InvalidInputError, "variable counts must be non-negative")
        self.n_anti = n_anti
        self.n_sym = n_sym
        self.terms: Dict[Monomial, complex] = {}
        for (anti, sym), coefficient in (terms or {}).items():
            self._add_term(tuple(anti), tuple(sym), coefficient)

    def _add_term(self, anti: Tuple[int, ...], sym: Tuple[int, ...], coefficient: complex) -> None:
        require(all(0 <= a < self.n_anti for a in anti), InvalidInputError, f"anti index out of range in {anti}")
        require(all(0 <= s < self.n_sym for s in sym), InvalidInputError, f"sym index out of range in {sym}")
        sign, anti = _sort_anti(anti)
        if anti is None or coefficient == 0:
            return
        key = (anti, tuple(sorted(sym)))
        value = self.terms.get(key, 0.0) + sign * coefficient
        if value == 0:
            self.terms.pop(key, None)
        else:
            self.terms[key] = value

    @classmethod
    def constant(cls, n_anti: int, n_sym: int, value: complex) -> "GrassmannPolynomial":
        return cls(n_anti, n_sym, {((), ()): value})

    @classmethod
    def anti_monomial(cls, n_anti: int, n_sym: int, anti: Sequence[int], coefficient: complex = 1.0,
                      sym: Sequence[int] = ()) -> "GrassmannPolynomial":
        """coefficient · Z_-(anti_0)⋯ in the given order (re-sorted with sign)."""
        return cls(n_anti, n_sym, {(tuple(anti), tuple(sym)): coefficient})

    @property
    def degree(self) -> int:
        return max((len(a) + len(s) for a, s in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def parity_of_terms(self) -> set:
        return {len(a) % 2 for a, _ in self.terms}

    def _compatible(self, other: "GrassmannPolynomial") -> None:
        require(self.n_anti == other.n_anti and self.n_sym == other.n_sym, InvalidInputError,
                "polynomials live over different variable sets")

    def __add__(self, other: "GrassmannPolynomial") -> "GrassmannPolynomial":
        self._compatible(other)
        out = GrassmannPolynomial(self.n_anti, self.n_sym, self.terms)
        for (anti, sym), coefficient in other.terms.items():
            out._add_term(anti, sym, coefficient)
        return out

    def __sub__(self, other: "GrassmannPolynomial") -> "GrassmannPolynomial":
        return self + other.scale(-1.0)

    def scale(self, factor: complex) -> "GrassmannPolynomial":
        return GrassmannPolynomial(self.n_anti, self.n_sym, {k: factor * c for k, c in self.terms.items()})

    def __mul__(self, other) -> "GrassmannPolynomial":
        if np.isscalar(other):
            return self.scale(other)
        self._compatible(other)
        out = GrassmannPolynomial(self.n_anti, self.n_sym)
        for (a1, s1), c1 in self.terms.items():
            for (a2, s2), c2 in other.terms.items():
                out._add_term(a1 + a2, s1 + s2, c1 * c2)
        return out

    __rmul__ = scale

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrassmannPolynomial):
            return NotImplemented
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0) - other.terms.get(k, 0)) < 1e-12 for k in keys)

    def __repr__(self) -> str:
        return f"GrassmannPolynomial(n_anti={self.n_anti}, n_sym={self.n_sym}, terms={self.terms})"


def poly_derivative(poly: GrassmannPolynomial, w: int, kind: str = "anti") -> GrassmannPolynomial:
    """
    Left derivative ∂^a_w or ∂^c_w.

    Args:
        poly: Polynomial to differentiate.
        w: Variable index.
        kind: "anti" for an odd variable, "sym" for an even one.

    Returns:
        The derivative, one degree lower.
    """
    out = GrassmannPolynomial(poly.n_anti, poly.n_sym)
    if kind == "anti":
        require(0 <= w < poly.n_anti, InvalidInputError, f"anti index {w} out of range")
        for (anti, sym), coefficient in poly.terms.items():
            if w in anti:
                position = anti.index(w)
                out._add_term(anti[:position] + anti[position + 1:], sym, (-1) ** position * coefficient)
    elif kind == "sym":
        require(0 <= w < poly.n_sym, InvalidInputError, f"sym index {w} out of range")
        for (anti, sym), coefficient in poly.terms.items():
            multiplicity = sym.count(w)
            if multiplicity:
                rest = list(sym)
                rest.remove(w)
                out._add_term(anti, tuple(rest), multiplicity * coefficient)
    else:
        raise InvalidInputError(f"unknown derivative kind '{kind}'")
    return out


def parity_diagonal(dim: int) -> np.ndarray:
    """Diagonal of the global parity operator on a Fock space of dimension dim."""
    states = np.arange(dim, dtype=np.uint64)
    return 1.0 - 2.0 * (np.bitwise_count(states) % 2)


def parity_defect(x, odd: bool) -> float:
    """Size of the part of x with the wrong parity."""
    x = np.asarray(x)
    p = parity_diagonal(x.shape[0])
    flipped = p[:, None] * x * p[None, :]
    wrong = x + flipped if odd else x - flipped
    return float(np.abs(wrong).max()) / 2.0


def poly_eval(poly: GrassmannPolynomial, z_minus: Sequence[np.ndarray], z_plus: Sequence[np.ndarray] = (),
              check_parity: bool = True) -> np.ndarray:
    """
    F(Z) = Σ c · Z_-(a_1)⋯Z_-(a_m) Z_+(s_1)⋯Z_+(s_l).

    Args:
        poly: The polynomial.
        z_minus: Odd operators substituted for the anti variables.
        z_plus: Even operators substituted for the sym variables.
        check_parity: Whether to verify the parity of the substituted operators.

    Returns:
        Dense operator.

    Raises:
        ParityError: If an odd slot holds a non-odd operator or vice versa.
    """
    require(len(z_minus) == poly.n_anti and len(z_plus) == poly.n_sym, InvalidInputError,
            f"expected {poly.n_anti} odd and {poly.n_sym} even values")
    operands = list(z_minus) + list(z_plus)
    if not operands:
        raise InvalidInputError("cannot infer the operator dimension of a variable-free polynomial")
    dim = np.asarray(operands[0]).shape[0]
    if check_parity:
        scale = max(1.0, max(float(np.abs(z).max()) for z in operands))
        for i, z in enumerate(z_minus):
            if parity_defect(z, odd=True) > PARITY_TOL * scale:
                raise ParityError(f"odd slot {i} holds an operator with an even part")
        for i, z in enumerate(z_plus):
            if parity_defect(z, odd=False) > PARITY_TOL * scale:
                raise ParityError(f"even slot {i} holds an operator with an odd part")

    out = np.zeros((dim, dim), dtype=np.complex128)
    cache: Dict[Monomial, np.ndarray] = {}
    for (anti, sym), coefficient in poly.terms.items():
        key = (anti, sym)
        if key not in cache:
            product = np.eye(dim, dtype=np.complex128)
            for a in anti:
                product = product @ z_minus[a]
            for s in sym:
                product = product @ z_plus[s]
            cache[key] = product
        out += coefficient * cache[key]
    return out


def variables(poly: GrassmannPolynomial) -> List[Tuple[str, int]]:
    return [("anti", i) for i in range(poly.n_anti)] + [("sym", i) for i in range(poly.n_sym)]


def poly_taylor(poly: GrassmannPolynomial, z_minus, z_plus, d_minus, d_plus, order: Optional[int] = None) -> np.ndarray:
    """
    Σ_n 1/n! Σ D_{i_1}⋯D_{i_n} ∂_{i_n}⋯∂_{i_1}F(Z), increments on the left.

    Exact for order ≥ degree when all values supercommute.
    """
    order = poly.degree if order is None else order
    increments = list(d_minus) + list(d_plus)
    names = variables(poly)
    dim = np.asarray((list(z_minus) + list(z_plus))[0]).shape[0]
    total = poly_eval(poly, z_minus, z_plus, check_parity=False)
    layer = [(np.eye(dim, dtype=np.complex128), poly)]
    factorial = 1.0
    for n in range(1, order + 1):
        factorial *= n
        next_layer = []
        for prefix, derived in layer:
            for (kind, index), increment in zip(names, increments):
                derivative = poly_derivative(derived, index, kind)
                if derivative.is_zero():
                    continue
                next_layer.append((prefix @ increment, derivative))
        for prefix, derived in next_layer:
            total = total + prefix @ poly_eval(derived, z_minus, z_plus, check_parity=False) / factorial
        layer = next_layer
    return total

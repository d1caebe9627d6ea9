"""
Antisymmetric Fock space over a finite one-particle space.

Basis states are occupation bitmasks b = Σ n_i 2^i ordered by integer value.
Mode operators follow the Jordan–Wigner convention: c_i picks up the sign
(-1)^(number of occupied modes below i). Inner products are linear in the
second argument, so c(f) = Σ conj(f_i) c_i is antilinear and c*(f) linear.
"""

import itertools
import logging
import os
import sys
from functools import cached_property
from typing import List, Sequence

import numpy as np
from scipy import sparse

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from config.settings import max_modes
from utils.error_handlers import InvalidInputError, ResourceError, ensure_finite

logger = logging.getLogger(__name__)


class FockBasis:
    """
    Occupation-number basis of Γ_a(C^m).

    Mode operators are kept sparse (one nonzero per column); field operators
    built from them are returned dense.
    """

    def __init__(self, modes: int, cap: int = None):
        cap = max_modes() if cap is None else cap
        if modes < 0:
            raise InvalidInputError(f"number of modes must be non-negative, got {modes}")
        if modes > cap:
            raise ResourceError(f"{modes} modes exceed the dense cap of {cap} (dim {2 ** modes})")
        self.modes = modes
        self.dim = 2 ** modes
        self.states = np.arange(self.dim)
        self.occupation_counts = np.bitwise_count(self.states.astype(np.uint64)).astype(np.int64)

    def __repr__(self) -> str:
        return f"FockBasis(modes={self.modes}, dim={self.dim})"

    @cached_property
    def mode_annihilators(self) -> List[sparse.csr_matrix]:
        ops = []
        for i in range(self.modes):
            occupied = ((self.states >> i) & 1).astype(bool)
            below = self.states & ((1 << i) - 1)
            signs = 1.0 - 2.0 * (np.bitwise_count(below.astype(np.uint64)) % 2)
            cols = self.states[occupied]
            rows = cols ^ (1 << i)
            ops.append(sparse.csr_matrix(
                (signs[occupied].astype(np.complex128), (rows, cols)), shape=(self.dim, self.dim)
            ))
        return ops

    @cached_property
    def mode_creators(self) -> List[sparse.csr_matrix]:
        return [op.conj().T.tocsr() for op in self.mode_annihilators]

    def _check_vector(self, f) -> np.ndarray:
        f = ensure_finite(f, "one-particle vector").astype(np.complex128).ravel()
        if f.shape[0] != self.modes:
            raise InvalidInputError(f"one-particle vector has length {f.shape[0]}, expected {self.modes}")
        return f

    def annihilator_sparse(self, f) -> sparse.csr_matrix:
        f = self._check_vector(f)
        out = sparse.csr_matrix((self.dim, self.dim), dtype=np.complex128)
        for coefficient, op in zip(np.conj(f), self.mode_annihilators):
            if coefficient != 0:
                out = out + coefficient * op
        return out

    def creator_sparse(self, f) -> sparse.csr_matrix:
        return self.annihilator_sparse(f).conj().T.tocsr()

    def vacuum(self) -> np.ndarray:
        state = np.zeros(self.dim, dtype=np.complex128)
        state[0] = 1.0
        return state

    def parity_diagonal(self) -> np.ndarray:
        return 1.0 - 2.0 * (self.occupation_counts % 2)

    def parity_operator(self) -> np.ndarray:
        return np.diag(self.parity_diagonal()).astype(np.complex128)

    def subset_index(self, subset: Sequence[int]) -> int:
        return int(sum(1 << i for i in subset))


def annihilator(basis: FockBasis, f) -> np.ndarray:
    """
    a(f) = Σ conj(f_i) a_i, antilinear in f.

    Args:
        basis: The Fock basis.
        f: One-particle vector of length basis.modes.

    Returns:
        Dense matrix of a(f).
    """
    return basis.annihilator_sparse(f).toarray()


def creator(basis: FockBasis, f) -> np.ndarray:
    """a*(f), the adjoint of annihilator(f); linear in f."""
    return basis.creator_sparse(f).toarray()


def wedge_vector(basis: FockBasis, vectors: Sequence) -> np.ndarray:
    """
    a*(f_1)⋯a*(f_n)Ω.

    Args:
        basis: The Fock basis.
        vectors: One-particle vectors f_1..f_n (n ≤ modes).

    Returns:
        The Fock-space state vector.
    """
    if len(vectors) > basis.modes:
        raise InvalidInputError(f"cannot wedge {len(vectors)} vectors in {basis.modes} modes")
    state = basis.vacuum()
    for f in reversed(list(vectors)):
        state = basis.creator_sparse(f) @ state
    return state


def second_quantization(basis: FockBasis, b) -> np.ndarray:
    """
    Γ(B) with Γ(B) wedge(f_1..f_n) = wedge(Bf_1..Bf_n).

    Matrix elements between n-particle basis states T and S are the minors
    det B[T, S].

    Args:
        basis: The Fock basis.
        b: m×m one-particle matrix.

    Returns:
        Dense 2^m × 2^m matrix.
    """
    b = ensure_finite(b, "one-particle matrix").astype(np.complex128)
    m = basis.modes
    if b.shape != (m, m):
        raise InvalidInputError(f"one-particle matrix has shape {b.shape}, expected {(m, m)}")
    gamma = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    gamma[0, 0] = 1.0
    for n in range(1, m + 1):
        subsets = list(itertools.combinations(range(m), n))
        indices = [basis.subset_index(s) for s in subsets]
        for s, col in zip(subsets, indices):
            block = b[:, list(s)]
            for t, row in zip(subsets, indices):
                gamma[row, col] = np.linalg.det(block[list(t), :])
    return gamma


def number_operator(basis: FockBasis) -> np.ndarray:
    """Diagonal operator counting occupied modes."""
    return np.diag(basis.occupation_counts.astype(np.complex128))

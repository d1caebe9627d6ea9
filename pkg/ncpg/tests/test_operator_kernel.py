import os
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import (PositiveOperator, frac_power, is_psd, matrix_function, psd_sqrt,
                                    random_operator, relative_defect, schatten_norm)
from utils.error_handlers import InvalidInputError, SingularityError

entries = st.floats(min_value=-3, max_value=3, allow_nan=False, allow_infinity=False)
square_3 = arrays(np.float64, (3, 3), elements=entries)


class TestSchattenNorms:
    """Test cases for Schatten norms."""

    @settings(max_examples=40, deadline=None)
    @given(square_3, square_3)
    def test_holder(self, a, b):
        """‖ab‖_1 ≤ ‖a‖_2 ‖b‖_2 and ‖ab‖_2 ≤ ‖a‖_4 ‖b‖_4."""
        assert schatten_norm(a @ b, 1) <= schatten_norm(a, 2) * schatten_norm(b, 2) * (1 + 1e-9) + 1e-12
        assert schatten_norm(a @ b, 2) <= schatten_norm(a, 4) * schatten_norm(b, 4) * (1 + 1e-9) + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(square_3)
    def test_monotone_in_p(self, a):
        norms = [schatten_norm(a, p) for p in (1, 2, 3, 4, np.inf)]
        assert all(x >= y - 1e-12 for x, y in zip(norms, norms[1:]))

    def test_identity_values(self):
        eye = np.eye(4)
        assert schatten_norm(eye, 1) == pytest.approx(4.0)
        assert schatten_norm(eye, 2) == pytest.approx(2.0)
        assert schatten_norm(eye, np.inf) == pytest.approx(1.0)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            schatten_norm(np.array([[np.nan, 0], [0, 1]]), 2)

    @pytest.mark.parametrize("p", [0.5, 0.0, -1.0])
    def test_rejects_exponents_below_one(self, p):
        with pytest.raises(InvalidInputError):
            schatten_norm(np.eye(2), p)

    def test_accepts_rounded_holder_exponent(self):
        assert schatten_norm(np.eye(2), 1.0 / (1.0 + 1e-14)) == pytest.approx(2.0)


class TestPositiveOperator:
    """Test cases for cached fractional powers."""

    def test_power_additivity(self, rng):
        a = random_operator(rng, 5)
        w = PositiveOperator(a @ a.conj().T + 0.1 * np.eye(5))
        assert relative_defect(w.power(0.3) @ w.power(0.45), w.power(0.75)) < 1e-10
        assert relative_defect(frac_power(w, 0.5) @ frac_power(w, 0.5), w.matrix) < 1e-10

    def test_diagonal_fast_path(self):
        w = PositiveOperator.from_diagonal([0.5, 0.25, 0.25])
        assert w.is_diagonal
        x = np.arange(9.0).reshape(3, 3)
        assert np.allclose(w.sandwich(x, 0.5, 0.5), np.diag(np.sqrt(w.eigenvalues)) @ x @ np.diag(np.sqrt(w.eigenvalues)))
        assert w.trace_with(np.eye(3)) == pytest.approx(1.0)

    def test_singular_density_raises(self):
        with pytest.raises(SingularityError):
            PositiveOperator(np.diag([1.0, 0.0]))

    def test_non_hermitian_raises(self):
        with pytest.raises(InvalidInputError):
            PositiveOperator(np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestMatrixFunctions:
    """Test cases for spectral calculus helpers."""

    def test_psd_sqrt_squares_back(self, rng):
        a = random_operator(rng, 6)
        positive = a.conj().T @ a
        root = psd_sqrt(positive)
        assert relative_defect(root @ root, positive) < 1e-10
        assert is_psd(root)

    def test_psd_sqrt_rejects_negative(self):
        with pytest.raises(InvalidInputError):
            psd_sqrt(np.diag([1.0, -0.5]))

    def test_exp_matches_scipy(self, rng):
        from scipy import linalg
        h = random_operator(rng, 4, hermitian=True)
        assert relative_defect(matrix_function(h, np.exp), linalg.expm(h)) < 1e-10

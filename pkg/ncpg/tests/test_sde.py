import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from stochastic.gbm import GBMSpec, build_gbm
from stochastic.grassmann import GrassmannPolynomial
from stochastic.sde import (DriftSpec, cubic_drift, default_initial, field_at, linear_drift, ou_closed_form,
                            ou_continuous_form, path_difference, sde_strong_solve, sde_weak_represent)
from utils.error_handlers import DivergenceError, InvalidInputError


@pytest.fixture
def A(rng):
    return 0.5 * rng.standard_normal((2, 2))


class TestDriftSpec:
    """Test cases for drift polynomials."""

    def test_linear_drift_has_no_nonlinear_part(self, A):
        drift = linear_drift(A)
        assert all(poly.is_zero() for poly in drift.nonlinear_part().polys)

    def test_cubic_drift_needs_four_modes(self):
        with pytest.raises(InvalidInputError):
            cubic_drift(np.eye(2), 0.5)

    def test_even_terms_rejected(self):
        even = GrassmannPolynomial.anti_monomial(2, 0, (0, 1))
        with pytest.raises(InvalidInputError):
            DriftSpec([even, even], np.zeros((2, 2)))

    def test_wrong_number_of_polynomials(self):
        with pytest.raises(InvalidInputError):
            DriftSpec(linear_drift(np.eye(2)).polys[:1], np.eye(2))


class TestStrongSolution:
    """Test cases for the Picard solver."""

    def test_default_initial_uses_reserved_copy(self, gbm_reserved, gbm_plain):
        assert any(np.abs(p).max() > 0 for p in default_initial(gbm_reserved))
        assert all(np.abs(p).max() == 0 for p in default_initial(gbm_plain))

    def test_zero_drift_is_the_driver(self, gbm_reserved):
        zero = np.zeros((2, 2))
        solution = sde_strong_solve(gbm_reserved, linear_drift(zero))
        assert path_difference(solution.path, ou_closed_form(gbm_reserved, zero)) < 1e-9

    def test_linear_drift_matches_closed_form(self, gbm_reserved, A):
        solution = sde_strong_solve(gbm_reserved, linear_drift(A))
        assert path_difference(solution.path, ou_closed_form(gbm_reserved, A)) < 1e-9
        assert solution.residual < 1e-9

    def test_discrete_and_continuous_ou_differ(self, gbm_reserved, A):
        assert path_difference(ou_closed_form(gbm_reserved, A), ou_continuous_form(gbm_reserved, A)) > 0.0

    def test_cubic_drift_converges(self):
        gbm = build_gbm(GBMSpec(mu=0.5, n_t=2, T=1.0, h_dim=4, n_reserved=0))
        solution = sde_strong_solve(gbm, cubic_drift(0.3 * np.eye(4), 0.5), tol=1e-10, max_iterations=30)
        assert solution.residual <= 1e-8
        assert solution.iterations <= 30

    def test_iteration_cap(self, gbm_reserved, A):
        with pytest.raises(DivergenceError):
            sde_strong_solve(gbm_reserved, linear_drift(A), max_iterations=1)

    def test_dimension_mismatch(self, gbm_reserved):
        with pytest.raises(InvalidInputError):
            sde_strong_solve(gbm_reserved, linear_drift(np.eye(4)))


class TestWeakRepresentation:
    """Test cases for the weak solution built from the linear process."""

    def test_moments_match_strong_solution(self, gbm_reserved, A):
        representation = sde_weak_represent(gbm_reserved, linear_drift(A, A + 0.25 * np.eye(2)))
        assert representation.max_residual < 1e-8
        assert representation.rows

    def test_shift_is_carried_by_the_linear_flow(self, gbm_reserved, A):
        h0 = [0.2 * gbm_reserved.reserved_generator(1), -0.1 * gbm_reserved.reserved_generator(0)]
        representation = sde_weak_represent(gbm_reserved, linear_drift(A, A + 0.25 * np.eye(2)), h0)
        unshifted = ou_closed_form(gbm_reserved, A)
        step = np.eye(2) + gbm_reserved.spec.delta * A
        expected = []
        for j in range(gbm_reserved.n_t + 1):
            flow = np.linalg.matrix_power(step, j)
            expected.append([unshifted[j][k] + field_at(h0, flow[:, k]) for k in range(2)])
        assert path_difference(representation.linear_path, expected) < 1e-12
        assert representation.max_residual < 1e-8

    def test_shift_needs_one_operator_per_direction(self, gbm_reserved, A):
        with pytest.raises(InvalidInputError):
            sde_weak_represent(gbm_reserved, linear_drift(A), [gbm_reserved.reserved_generator(0)])

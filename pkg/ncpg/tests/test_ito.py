import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import random_operator, relative_defect
from spaces.filtration import AdaptedSimpleProcess
from stochastic.ito import (ItoProcess, hardy_twisted_norm, ito_integral, ito_isometry_defect, quadratic_variation,
                            real_theta_basis, refinement_table, rotated_real_basis, trace_pairing)
from utils.error_handlers import AdaptednessError, InvalidInputError, UnsupportedExponentError


def vector(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def random_adapted(gbm, rng):
    filtration = gbm.filtration
    values = [filtration.embed_low(random_operator(rng, filtration.level_dim(j)), j) for j in range(gbm.n_t)]
    return AdaptedSimpleProcess(list(range(gbm.n_t + 1)), values)


class TestBases:
    """Test cases for real Θ-bases and the trace pairing."""

    def test_real_basis_is_orthonormal(self):
        basis = real_theta_basis(4)
        assert np.allclose(basis.conj() @ basis.T, np.eye(4))

    def test_rotated_basis_is_orthonormal(self, rng):
        basis = rotated_real_basis(4, rng)
        assert np.allclose(basis.conj() @ basis.T, np.eye(4))

    def test_odd_dimension_rejected(self):
        with pytest.raises(InvalidInputError):
            real_theta_basis(3)

    def test_trace_pairing_is_basis_independent(self, rng):
        dim = 4
        F_maps = [random_operator(rng, dim) for _ in range(2)]
        H_maps = [random_operator(rng, dim) for _ in range(2)]
        A = random_operator(rng, 2)
        values = []
        for basis in (real_theta_basis(2), rotated_real_basis(2, rng)):
            F = np.array([np.tensordot(v, F_maps, axes=1) for v in basis])
            H = np.array([np.tensordot(v, H_maps, axes=1) for v in basis])
            values.append(trace_pairing(basis, F, H, A))
        assert relative_defect(values[0], values[1]) < 1e-10


class TestItoIntegral:
    """Test cases for stochastic integrals of simple processes."""

    def test_integral_starts_at_zero(self, rng, gbm_plain):
        F = random_adapted(gbm_plain, rng)
        assert np.allclose(ito_integral(gbm_plain, F, 0, vector(rng, 2)), 0.0)

    @pytest.mark.parametrize("tau", [0.0, 0.25, -0.75])
    def test_isometry(self, rng, gbm_plain, tau):
        F = random_adapted(gbm_plain, rng)
        measured, predicted = ito_isometry_defect(gbm_plain, F, vector(rng, 2), tau)
        assert measured == pytest.approx(predicted, rel=1e-9)

    def test_integral_is_a_martingale(self, rng, gbm_plain):
        F = random_adapted(gbm_plain, rng)
        v = vector(rng, 2)
        path = [ito_integral(gbm_plain, F, k, v) for k in range(gbm_plain.n_t + 1)]
        for s in range(gbm_plain.n_t):
            for t in range(s + 1, gbm_plain.n_t + 1):
                assert relative_defect(gbm_plain.filtration.cond_exp(path[t], s), path[s]) < 1e-10

    def test_scalar_integrand_needs_direction(self, rng, gbm_plain):
        with pytest.raises(InvalidInputError):
            ito_integral(gbm_plain, random_adapted(gbm_plain, rng), gbm_plain.n_t)

    def test_non_adapted_integrand_rejected(self, gbm_plain):
        late = gbm_plain.increment(1, np.eye(2)[0])
        F = AdaptedSimpleProcess([0, 1], [late])
        with pytest.raises(AdaptednessError):
            ito_integral(gbm_plain, F, 1, np.eye(2)[0])


class TestBracket:
    """Test cases for quadratic covariation."""

    def test_bracket_of_two_fields(self, gbm_plain):
        eye = np.eye(2)
        first, second = ItoProcess.along(gbm_plain, eye[0]), ItoProcess.along(gbm_plain, eye[1])
        value, defect = quadratic_variation(gbm_plain, first, second, gbm_plain.n_t)
        expected = gbm_plain.spec.bilinear(eye[0], eye[1]) * gbm_plain.spec.T * np.eye(gbm_plain.dim)
        assert relative_defect(value, expected) < 1e-10
        assert defect < 1e-9

    def test_process_path_matches_field(self, gbm_plain):
        v = np.eye(2)[0]
        process = ItoProcess.along(gbm_plain, v)
        for k in range(gbm_plain.n_t + 1):
            assert relative_defect(process.value(k), gbm_plain.field(k, v)) < 1e-10

    def test_scalar_integrand_rejected(self, rng, gbm_plain):
        with pytest.raises(InvalidInputError):
            ItoProcess(gbm_plain, random_adapted(gbm_plain, rng))


class TestHardyNorm:
    """Test cases for twisted Hardy norms."""

    def test_small_exponent_rejected(self, rng, gbm_plain):
        with pytest.raises(UnsupportedExponentError):
            hardy_twisted_norm(gbm_plain, random_adapted(gbm_plain, rng), 1.5, direction=np.eye(2)[0])

    def test_norm_is_positive_and_grows_with_time(self, rng, gbm_plain):
        F = random_adapted(gbm_plain, rng)
        v = np.eye(2)[0]
        early = hardy_twisted_norm(gbm_plain, F, 2.0, level=1, direction=v)
        full = hardy_twisted_norm(gbm_plain, F, 2.0, direction=v)
        assert early.combined > 0.0
        assert full.Hc >= early.Hc - 1e-12
        assert full.Hr >= early.Hr - 1e-12

    def test_empty_window(self, rng, gbm_plain):
        norms = hardy_twisted_norm(gbm_plain, random_adapted(gbm_plain, rng), 2.0, level=0, direction=np.eye(2)[0])
        assert norms.combined == 0.0


class TestItoFormula:
    """Test cases for the Itô formula on refining grids."""

    def test_linear_polynomial_is_exact(self):
        table = refinement_table("linear", (1, 2))
        assert list(table.columns) == ["n_t", "delta", "residual", "ratio"]
        assert table["residual"].max() < 1e-10

    def test_unknown_scenario(self):
        with pytest.raises(InvalidInputError):
            refinement_table("quartic")

    @pytest.mark.slow
    @pytest.mark.parametrize("scenario", ["quadratic", "cubic", "mixed"])
    def test_residual_shrinks_under_refinement(self, scenario):
        table = refinement_table(scenario, (1, 2, 4))
        assert table["ratio"].dropna().max() < 0.75

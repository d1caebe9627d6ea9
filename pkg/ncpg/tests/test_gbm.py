import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import anticommutator, relative_defect, schatten_norm
from models.araki_wyss import state
from spaces.lp_spaces import twisted_embed
from stochastic.gbm import (GBMSpec, build_gbm, c_prime, gbm_covariance_report, gbm_field, isometry_constant,
                            modular_weight_defect, theta_permutation)
from utils.error_handlers import InvalidInputError, ResourceError
from utils.fits import loglog_fit


def vector(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


class TestGBMSpec:
    """Test cases for GBM parameters."""

    def test_bilinear_form_is_antisymmetric(self, rng):
        spec = GBMSpec(h_dim=4)
        f, g = vector(rng, 4), vector(rng, 4)
        assert spec.bilinear(f, g) == pytest.approx(-spec.bilinear(g, f))
        assert np.allclose(spec.bilinear_matrix(), -spec.bilinear_matrix().T)

    def test_constants(self):
        assert c_prime(0.5, 0.0, 0.0) == pytest.approx(17.0 / 15.0, abs=1e-14)
        assert isometry_constant(0.5, 0.0) == pytest.approx(8.0 / 15.0, abs=1e-14)
        assert isometry_constant(0.5, 0.3) == pytest.approx(isometry_constant(0.5, -0.3))

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            GBMSpec(h_dim=3)
        with pytest.raises(InvalidInputError):
            GBMSpec(mu=1.0)
        with pytest.raises(InvalidInputError):
            GBMSpec(h_dim=2, c_tilde=(1.0, 2.0))

    def test_theta_is_an_involution(self):
        perm = theta_permutation(GBMSpec(h_dim=2, n_t=3, n_reserved=3))
        assert np.array_equal(perm[perm], np.arange(len(perm)))
        assert perm[2] == 2

    def test_mode_cap(self):
        with pytest.raises(ResourceError):
            build_gbm(GBMSpec(h_dim=4, n_t=4), cap=12)


class TestGBMProcess:
    """Test cases for the GBM fields."""

    def test_covariance_on_the_grid(self, rng, gbm_plain):
        f, g = vector(rng, 2), vector(rng, 2)
        for t in range(gbm_plain.n_t + 1):
            for s in range(gbm_plain.n_t + 1):
                measured = state(gbm_plain.model, gbm_plain.field(t, f) @ gbm_plain.field(s, g))
                assert abs(measured - gbm_plain.covariance(t, s, f, g)) < 1e-10

    def test_increments_anticommute(self, rng, gbm_plain):
        f, g = vector(rng, 2), vector(rng, 2)
        assert np.abs(anticommutator(gbm_plain.increment(0, f), gbm_plain.increment(1, g))).max() < 1e-12

    def test_field_from_embeddings(self, rng, gbm_plain):
        f = vector(rng, 2)
        assert relative_defect(gbm_plain.field_from_embeddings(2, f), gbm_plain.field(2, f)) < 1e-10

    def test_field_is_adapted(self, rng, gbm_plain):
        x = gbm_plain.field(1, vector(rng, 2))
        assert gbm_plain.filtration.is_adapted(x, 1)
        assert not gbm_plain.filtration.is_adapted(gbm_plain.increment(1, np.eye(2)[0]), 1)

    def test_centered_increments(self, gbm_plain):
        increment = gbm_plain.increment(1, np.eye(2)[0])
        assert abs(state(gbm_plain.model, increment)) < 1e-14
        assert relative_defect(gbm_plain.filtration.cond_exp(increment, 1), np.zeros_like(increment)) < 1e-12

    def test_modular_split(self, rng, gbm_plain):
        f = vector(rng, 2)
        plus, minus = gbm_plain.split_increment(0, f)
        assert relative_defect(plus + minus, gbm_plain.increment(0, f)) < 1e-12
        for tau in (0.25, -0.5, 1.0):
            assert modular_weight_defect(gbm_plain, 0, f, tau) < 1e-10

    def test_second_moment_constant(self, gbm_plain):
        f = np.eye(2)[0]
        x = gbm_plain.field(gbm_plain.n_t, f)
        assert state(gbm_plain.model, x.conj().T @ x).real == pytest.approx(17.0 / 15.0, abs=1e-10)

    def test_covariance_report(self, gbm_plain):
        report = gbm_covariance_report(gbm_plain)
        assert report.max_formula_defect < 1e-10
        assert report.max_scaling_defect > 1e-3
        assert len(report.rows) == 25

    def test_increment_norm_slope(self):
        gbm = build_gbm(GBMSpec(n_t=4, h_dim=2))
        f = np.eye(2)[0]
        widths = [k * gbm.spec.delta for k in (1, 2, 4)]
        norms = [schatten_norm(twisted_embed(gbm.model, gbm.field_between(0, k, f), 2.0, 0.0), 2.0) for k in (1, 2, 4)]
        assert loglog_fit(widths, norms).slope == pytest.approx(0.5, abs=0.05)

    def test_reserved_pair(self, gbm_reserved):
        value = state(gbm_reserved.model, gbm_reserved.reserved_generator(0) @ gbm_reserved.reserved_generator(1))
        assert value == pytest.approx(-1.0, abs=1e-10)

    def test_grid_times(self, gbm_plain):
        assert gbm_plain.level_of_time(0.5) == 1
        assert relative_defect(gbm_field(gbm_plain, 1.0, np.eye(2)[1]), gbm_plain.field(2, np.eye(2)[1])) < 1e-14
        with pytest.raises(InvalidInputError):
            gbm_plain.level_of_time(0.3)
        with pytest.raises(InvalidInputError):
            gbm_plain.field(3, np.eye(2)[0])

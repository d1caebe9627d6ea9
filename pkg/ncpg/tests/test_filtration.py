import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import is_psd, random_operator, relative_defect
from models.araki_wyss import build_model, modular_flow, state
from spaces.filtration import (AdaptedSimpleProcess, Filtration, column_hardy_norm, hardy_norms,
                               martingale_from_terminal, q_sigma)
from utils.error_handlers import InvalidInputError, UnsupportedExponentError


@pytest.fixture(scope="module")
def filtration(model3):
    return Filtration(model3, [0, 1, 2, 3])


def low(filtration, rng, level):
    return filtration.embed_low(random_operator(rng, filtration.level_dim(level)), level)


class TestConditionalExpectation:
    """Test cases for ω_j onto prefix subalgebras."""

    def test_unital_and_state_preserving(self, rng, filtration, model3):
        x = random_operator(rng, model3.dim)
        for level in range(filtration.n_levels):
            assert relative_defect(filtration.cond_exp(model3.identity(), level), model3.identity()) < 1e-12
            assert abs(state(model3, filtration.cond_exp(x, level)) - state(model3, x)) < 1e-12

    def test_bimodule_property(self, rng, filtration, model3):
        x = random_operator(rng, model3.dim)
        for level in range(filtration.n_levels):
            a, b = low(filtration, rng, level), low(filtration, rng, level)
            assert relative_defect(filtration.cond_exp(a @ x @ b, level),
                                   a @ filtration.cond_exp(x, level) @ b) < 1e-10

    def test_schwarz_inequality(self, rng, filtration, model3):
        x = random_operator(rng, model3.dim)
        e = filtration.cond_exp(x, 1)
        assert is_psd(filtration.cond_exp(x.conj().T @ x, 1) - e.conj().T @ e)

    def test_commutes_with_modular_flow(self, rng, filtration, model3):
        x = random_operator(rng, model3.dim)
        assert relative_defect(filtration.cond_exp(modular_flow(model3, x, -0.4), 2),
                               modular_flow(model3, filtration.cond_exp(x, 2), -0.4)) < 1e-10

    def test_tower_property(self, rng, filtration, model3):
        x = random_operator(rng, model3.dim)
        assert relative_defect(filtration.cond_exp(filtration.cond_exp(x, 2), 1), filtration.cond_exp(x, 1)) < 1e-12

    def test_slice_matches_wick_truncation(self, rng, filtration, model3):
        x = random_operator(rng, model3.dim)
        for level in range(filtration.n_levels):
            assert relative_defect(filtration.cond_exp(x, level, "wick"), filtration.cond_exp(x, level)) < 1e-10

    def test_top_level_is_identity_map(self, rng, filtration, model3):
        x = random_operator(rng, model3.dim)
        assert relative_defect(filtration.cond_exp(x, 3), x) < 1e-12
        assert filtration.is_adapted(low(filtration, rng, 1), 1)
        assert not filtration.is_adapted(x, 1)

    def test_lp_duality(self, rng, filtration, model3):
        a = model3.sandwich(random_operator(rng, model3.dim), 1 / 6, 1 / 6)
        b = model3.sandwich(random_operator(rng, model3.dim), 1 / 3, 1 / 3)
        left = np.trace(filtration.cond_exp_lp(a, 1, 3.0) @ b)
        right = np.trace(a @ filtration.cond_exp_lp(b, 1, 1.5))
        assert abs(left - right) < 1e-10

    def test_invalid_construction(self, model3):
        with pytest.raises(InvalidInputError):
            Filtration(model3, [0, 2, 1])
        with pytest.raises(InvalidInputError):
            Filtration(build_model([0.5, 0.5], theta_perm=[1, 0]), [0, 1, 2])
        with pytest.raises(InvalidInputError):
            Filtration(model3, [0, 1]).cond_exp(np.eye(8), 0, method="exact")


class TestMartingales:
    """Test cases for martingales, square functions and Q_σ."""

    def test_martingale_from_terminal(self, rng, filtration, model3):
        x = model3.sandwich(random_operator(rng, model3.dim), 0.125, 0.125)
        martingale = martingale_from_terminal(filtration, x, 4.0)
        assert relative_defect(martingale.values[-1], x) < 1e-12
        norms = martingale.norms()
        assert all(a <= b + 1e-10 for a, b in zip(norms, norms[1:]))
        assert relative_defect(sum(martingale.differences()), x) < 1e-12

    def test_hardy_norms_are_finite(self, rng, filtration, model3):
        x = model3.sandwich(random_operator(rng, model3.dim), 0.125, 0.125)
        norms = hardy_norms(filtration, martingale_from_terminal(filtration, x, 4.0).differences(), 4.0)
        assert np.isfinite(norms.h_norm) and norms.h_norm > 0
        assert np.isfinite(norms.H_norm) and norms.H_norm > 0

    def test_conditioned_norms_need_p_at_least_two(self, filtration, model3):
        with pytest.raises(UnsupportedExponentError):
            hardy_norms(filtration, [model3.identity()], 1.5)

    def test_q_sigma_is_idempotent(self, rng, filtration, model3):
        values = [filtration.cond_exp(random_operator(rng, model3.dim), j) for j in range(3)]
        process = AdaptedSimpleProcess([0, 1, 2, 3], values)
        once = q_sigma(filtration, process, [0, 2, 3])
        twice = q_sigma(filtration, once, [0, 2, 3])
        assert np.abs(once.values - twice.values).max() < 1e-10
        assert once.breakpoints == [0, 2, 3]

    def test_q_sigma_fixes_coarse_adapted_processes(self, rng, filtration, model3):
        value = filtration.cond_exp(random_operator(rng, model3.dim), 0)
        process = AdaptedSimpleProcess([0, 1, 2], [value, value])
        assert np.abs(q_sigma(filtration, process, [0, 2]).values[0] - value).max() < 1e-12

    def test_column_norm_of_constant(self, filtration, model3):
        process = AdaptedSimpleProcess([0, 2], [model3.identity()])
        assert column_hardy_norm(filtration, process, 2.0) == pytest.approx(np.sqrt(2.0), rel=1e-10)

    def test_process_validation(self, model3):
        with pytest.raises(InvalidInputError):
            AdaptedSimpleProcess([0, 0], [model3.identity()])
        with pytest.raises(InvalidInputError):
            AdaptedSimpleProcess([0, 1, 2], [model3.identity()])

import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.matchings import signed_matching_sum
from kernel.operator_kernel import random_operator, relative_defect
from models.araki_wyss import (beta, build_model, gamma, gamma_star, hyper_norm_estimate, k_unit, kms_defect,
                               modular_flow, oracle_moment_defect, ou_semigroup, sigma, state, wick,
                               wick_basis_decompose, wick_gram)
from utils.error_handlers import InvalidInputError, ResourceError


def vector(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


class TestQuasiFreeState:
    """Test cases for the quasi-free state and its fields."""

    def test_normalized(self, model2):
        assert state(model2, model2.identity()) == pytest.approx(1.0)
        assert np.all(model2.weights > 0)

    @pytest.mark.parametrize("mu", [0.25, 0.5, 0.75])
    def test_two_point_functions(self, rng, mu):
        model = build_model([mu, mu ** 1.5])
        f, g = vector(rng, 2), vector(rng, 2)
        rho = model.rho
        assert abs(state(model, gamma_star(model, f) @ gamma(model, g)) - np.vdot(g, f / rho ** 2)) < 1e-12
        assert abs(state(model, gamma(model, g) @ gamma_star(model, f)) - np.vdot(g, rho ** 2 * f)) < 1e-12

    def test_car_of_fields(self, rng, model2):
        f, g = vector(rng, 2), vector(rng, 2)
        field_scale = model2.field_scale
        anti = gamma(model2, f) @ gamma_star(model2, g) + gamma_star(model2, g) @ gamma(model2, f)
        assert relative_defect(anti, np.vdot(field_scale * f, field_scale * g) * model2.identity()) < 1e-12

    @pytest.mark.parametrize("n", [4, 6])
    def test_moments_are_matching_sums(self, rng, model3, n):
        ops = [beta(model3, vector(rng, 6)) for _ in range(n)]
        product = model3.identity()
        for op in ops:
            product = product @ op
        predicted = signed_matching_sum(lambda i, j: state(model3, ops[i] @ ops[j]), n)
        assert abs(state(model3, product) - predicted) < 1e-9 * max(1.0, abs(predicted))

    def test_odd_moments_vanish(self, rng, model2):
        ops = [beta(model2, vector(rng, 4)) for _ in range(3)]
        assert abs(state(model2, ops[0] @ ops[1] @ ops[2])) < 1e-12

    def test_invalid_rho(self):
        with pytest.raises(InvalidInputError):
            build_model([0.5, 1.2])
        with pytest.raises(InvalidInputError):
            build_model([0.5, 0.3], theta_perm=[1, 0])

    def test_doubled_gns_oracle(self):
        assert oracle_moment_defect(build_model([0.5]), max_degree=4) < 1e-10


class TestModularStructure:
    """Test cases for the modular flow and the KMS condition."""

    def test_kms(self, rng, model2):
        for _ in range(10):
            x, y = random_operator(rng, model2.dim), random_operator(rng, model2.dim)
            assert kms_defect(model2, x, y) < 1e-9

    def test_group_law(self, rng, model2):
        x = random_operator(rng, model2.dim)
        assert relative_defect(modular_flow(model2, modular_flow(model2, x, 0.3), -0.55),
                               modular_flow(model2, x, -0.25)) < 1e-10

    def test_flow_preserves_state(self, rng, model2):
        x = random_operator(rng, model2.dim)
        assert abs(state(model2, sigma(model2, x, 0.7)) - state(model2, x)) < 1e-12


class TestWickCalculus:
    """Test cases for Wick products and their Gram structure."""

    def test_basis_is_orthonormal(self, model2):
        gram = model2.wick_basis.gram()
        assert np.abs(gram - np.eye(len(gram))).max() < 1e-10

    def test_decomposition_is_complete(self, rng, model2):
        x = random_operator(rng, model2.dim)
        basis = model2.wick_basis
        assert relative_defect(basis.recompose(basis.decompose(x)), x) < 1e-10
        assert len(wick_basis_decompose(model2, model2.identity())) == 1

    def test_wick_product_is_centered(self, rng, model2):
        legs = [vector(rng, 4) for _ in range(2)]
        assert abs(state(model2, wick(model2, legs))) < 1e-12

    @pytest.mark.parametrize("tau", [0.0, 0.25, 0.5])
    def test_gram_determinant(self, rng, model2, tau):
        left = [vector(rng, 4) for _ in range(2)]
        right = [vector(rng, 4) for _ in range(2)]
        direct = state(model2, wick(model2, left).conj().T @ modular_flow(model2, wick(model2, right), tau))
        assert abs(wick_gram(model2, left, right, tau) - direct) < 1e-10 * max(1.0, abs(direct))

    def test_degree_mismatch_is_orthogonal(self, model2):
        assert wick_gram(model2, [k_unit(model2, 0)], [k_unit(model2, 0), k_unit(model2, 1)]) == 0.0

    def test_wick_degree_limit(self, model2):
        with pytest.raises(InvalidInputError):
            wick(model2, [k_unit(model2, 0)] * 5)

    def test_wick_basis_cap(self):
        with pytest.raises(ResourceError):
            build_model([0.5] * 6).wick_basis


class TestOrnsteinUhlenbeck:
    """Test cases for the OU semigroup and its hypercontractivity estimate."""

    def test_semigroup_law(self, rng, model2):
        x = random_operator(rng, model2.dim)
        assert relative_defect(ou_semigroup(model2, ou_semigroup(model2, x, 0.2), 0.3),
                               ou_semigroup(model2, x, 0.5)) < 1e-10
        assert relative_defect(ou_semigroup(model2, x, 0.0), x) < 1e-10

    def test_eigen_relation(self, model2):
        monomial = model2.wick_basis.monomial((0, 3))
        assert relative_defect(ou_semigroup(model2, monomial, 0.4), np.exp(-0.8) * monomial) < 1e-10

    def test_negative_time(self, model2):
        with pytest.raises(InvalidInputError):
            ou_semigroup(model2, model2.identity(), -1.0)

    def test_contractive_at_long_times(self):
        model = build_model([0.5])
        estimate, _ = hyper_norm_estimate(model, 3.0, 4.0 / 3.0, 2.0, probes=30, seed=3,
                                          ascent_starts=1, ascent_iterations=300)
        assert 1.0 - 1e-12 <= estimate <= 1.0 + 1e-6

    def test_estimate_is_deterministic(self):
        model = build_model([0.5])
        first, _ = hyper_norm_estimate(model, 0.1, 4.0 / 3.0, 2.0, probes=10, seed=5, ascent_starts=1,
                                       ascent_iterations=50)
        second, _ = hyper_norm_estimate(model, 0.1, 4.0 / 3.0, 2.0, probes=10, seed=5, ascent_starts=1,
                                        ascent_iterations=50)
        assert first == second

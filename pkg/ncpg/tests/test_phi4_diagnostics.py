import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import relative_defect
from lattice.phi4_diagnostics import (LatticeSpec, chi, covariance_exponent, covariance_sum, growth_exponent,
                                      growth_table, lattice_weight, partition_linear_fit, partition_series, phi4_scan,
                                      quartic_shell_sum, quartic_shell_sum_brute, quartic_twist_factor,
                                      restricted_quartic_sum, tiny_cutoff_V, v_l2_difference, v_lp_growth)
from models.araki_wyss import beta, state
from utils.error_handlers import AliasingError, InvalidInputError, ResourceError


class TestCutoff:
    """Test cases for the smooth cutoff and the covariance."""

    def test_chi_plateau_and_support(self):
        values = chi([0.0, 0.25, 0.5, 0.75, 1.0, 2.0])
        assert values[:3] == pytest.approx([1.0, 1.0, 1.0])
        assert 0.0 < values[3] < 1.0
        assert values[4:] == pytest.approx([0.0, 0.0])

    def test_chi_is_decreasing(self):
        values = chi(np.linspace(0.0, 1.2, 121))
        assert np.all(np.diff(values) <= 1e-15)

    def test_zero_cutoff_keeps_only_the_origin(self):
        assert covariance_sum(0.1, 0.0) == pytest.approx(1.0)

    def test_covariance_exponent(self):
        fit = covariance_exponent(0.25, (8, 16, 32, 64))
        assert fit.expected == pytest.approx(0.5)
        assert abs(fit.exponent - fit.expected) < 0.1

    def test_logarithmic_growth_at_zero(self):
        fit = covariance_exponent(0.0, (8, 16, 32))
        assert fit.logarithmic
        assert fit.fit.slope > 0.0

    def test_theta_range(self):
        with pytest.raises(InvalidInputError):
            LatticeSpec(theta=0.5)


class TestQuarticSums:
    """Test cases for momentum-conserving quartic sums."""

    @pytest.mark.parametrize("t", [1.5, 2.0, 3.0])
    def test_fft_matches_brute_force(self, t):
        kx, ky, weight = lattice_weight(0.1, t)
        assert quartic_shell_sum(kx, ky, weight) == pytest.approx(quartic_shell_sum_brute(kx, ky, weight), rel=1e-10)

    def test_small_grid_aliases(self):
        kx, ky, weight = lattice_weight(0.1, 2.0)
        with pytest.raises(AliasingError):
            quartic_shell_sum(kx, ky, weight, grid=8)

    def test_brute_force_is_capped(self):
        kx, ky, weight = lattice_weight(0.1, 5.0)
        with pytest.raises(ResourceError):
            quartic_shell_sum_brute(kx, ky, weight)

    def test_differences_telescope(self):
        spec = LatticeSpec(theta=0.1, cutoffs=(4, 8, 16))
        split = v_l2_difference(spec, 4, 8) + v_l2_difference(spec, 8, 16)
        assert split == pytest.approx(v_l2_difference(spec, 4, 16), rel=1e-9)

    def test_difference_is_non_negative(self):
        spec = LatticeSpec(theta=0.1, cutoffs=(4, 8))
        assert v_l2_difference(spec, 4, 8) >= 0.0
        assert v_l2_difference(spec, 4, 4) == 0.0

    def test_brute_force_difference(self):
        spec = LatticeSpec(theta=0.1, cutoffs=(2, 3))
        assert v_l2_difference(spec, 2, 3, brute_force=True) == pytest.approx(v_l2_difference(spec, 2, 3), rel=1e-10)

    def test_cutoff_order_and_box(self):
        spec = LatticeSpec(theta=0.1, cutoffs=(4, 8))
        with pytest.raises(InvalidInputError):
            v_l2_difference(spec, 8, 4)
        with pytest.raises(InvalidInputError):
            v_l2_difference(spec, 4, 16)


class TestGrowthAndPartition:
    """Test cases for the L^p growth bound and the partition series."""

    def test_growth_slope_is_exact(self):
        spec = LatticeSpec(theta=0.1)
        table, fit = growth_table(spec)
        assert list(table.columns) == ["p", "bound", "s_opt", "exponent"]
        assert fit.slope == pytest.approx(growth_exponent(spec.theta, spec.nu), abs=1e-10)

    def test_growth_needs_p_at_least_two(self):
        with pytest.raises(InvalidInputError):
            v_lp_growth(LatticeSpec(theta=0.1), 1.0)

    def test_series_converges_for_small_theta(self):
        series = partition_series(LatticeSpec(theta=0.1), 0.1, 2.0)
        assert series.converged
        assert series.hypothesis_holds
        assert series.lambda_star == np.inf

    def test_series_diverges_for_large_theta(self):
        series = partition_series(LatticeSpec(theta=0.2), 0.1, 2.0)
        assert not series.converged
        assert not series.hypothesis_holds
        assert series.lambda_star == 0.0

    def test_zero_coupling(self):
        assert partition_series(LatticeSpec(theta=0.1), 0.0, 2.0).total == 1.0

    def test_tail_is_linear_in_coupling(self):
        _, fit = partition_linear_fit(LatticeSpec(theta=0.1), (0.001, 0.002, 0.005, 0.01))
        assert fit.slope == pytest.approx(1.0, abs=0.1)


class TestScanAndTinyCutoff:
    """Test cases for scan tables and the operator-level quartic."""

    def test_scan_rows(self):
        table = phi4_scan(LatticeSpec(theta=0.1, cutoffs=(4, 8, 16)), [0.1, 0.2])
        assert list(table.columns) == ["theta", "tau", "s", "t", "value"]
        assert len(table) == 4
        assert (table["value"] >= 0).all()

    def test_wick_norm_matches_operator_norm(self):
        tiny = tiny_cutoff_V([(0, 0), (1, 0)])
        assert relative_defect(tiny.l2_norm_sq_wick(0.0), tiny.l2_norm_sq(0.0)) < 1e-10
        assert relative_defect(tiny.V, tiny.V.conj().T) < 1e-10
        assert tiny.sup_norm() > 0.0

    def test_too_many_momenta(self):
        with pytest.raises(InvalidInputError):
            tiny_cutoff_V([(0, 0), (1, 0), (0, 1), (1, 1)])

    @pytest.mark.parametrize("momenta", [[(0, 0), (1, 0)], [(0, 0), (1, 0), (-1, 0)]])
    @pytest.mark.parametrize("tau", [0.0, 0.25])
    def test_operator_norm_matches_lattice_sum(self, momenta, tau):
        tiny = tiny_cutoff_V(momenta)
        assert relative_defect(tiny.l2_norm_sq(tau), restricted_quartic_sum(momenta, tau=tau)) < 1e-8

    def test_lattice_sum_for_two_momenta(self):
        g = 2.0 ** -0.9
        expected = 0.5 ** -8 * 4.0 * (1.0 + 4.0 * g ** 2 + g ** 4)
        assert restricted_quartic_sum([(0, 0), (1, 0)]) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("tau", [0.0, 0.25, -0.5])
    def test_twist_factor_is_independent_of_tau(self, tau):
        assert quartic_twist_factor(0.5, tau) == pytest.approx(256.0, rel=1e-12)

    def test_single_spin_quartic_vanishes(self):
        tiny = tiny_cutoff_V([(0, 0)], spins=1)
        assert np.abs(tiny.V).max() < 1e-10
        assert restricted_quartic_sum([(0, 0)], spins=1) == 0.0

    def test_single_momentum_is_wick_square_of_the_density(self):
        tiny = tiny_cutoff_V([(0, 0)], spins=2)
        model = tiny.model
        psi = [beta(model, leg) for leg in tiny.psi_legs]
        psi_bar = [beta(model, leg) for leg in tiny.psi_bar_legs]
        density = [-p @ pb for p, pb in zip(psi, psi_bar)]
        Q = sum(density)
        C_t = state(model, psi[0] @ psi_bar[0])
        grassmann_square = Q @ Q - sum(q @ q for q in density)
        expected = grassmann_square + 2 * C_t * Q + 2 * C_t ** 2 * model.identity()
        assert relative_defect(tiny.V, expected) < 1e-10

    def test_repeated_momenta_rejected(self):
        with pytest.raises(InvalidInputError):
            restricted_quartic_sum([(0, 0), (0, 0)])

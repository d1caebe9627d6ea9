"""
Φ⁴ lattice diagnostics as a verify suite.
"""

import os
import sys
from dataclasses import replace
from typing import Any, Dict, List

import numpy as np

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import relative_defect
from lattice.phi4_diagnostics import (LatticeSpec, covariance_exponent, difference_decay, growth_exponent,
                                      growth_table, lattice_weight, partition_linear_fit, partition_series,
                                      quartic_shell_sum, quartic_shell_sum_brute, restricted_quartic_sum,
                                      tiny_cutoff_V, v_l2_difference, v_l2_norm_sq)
from suites.base_suite import BaseSuite, CheckResult

VERIFY_CUTOFFS = (8, 16, 32, 64)
PARTITION_COUPLINGS = (0.001, 0.002, 0.005, 0.01)
TINY_MOMENTA = ((0, 0), (1, 0), (-1, 0))
TINY_LATTICE_TOL = 1e-8


class Phi4Suite(BaseSuite):
    name = "phi4"

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config = context["config"]
        thetas = [theta for theta in config.scan_values("theta", [0.1, 0.25]) if theta > 0]
        cutoffs = tuple(c for c in config.scan_values("cutoffs", list(VERIFY_CUTOFFS)) if c <= max(VERIFY_CUTOFFS))
        cutoffs = cutoffs if len(cutoffs) >= 3 else VERIFY_CUTOFFS
        base = LatticeSpec(theta=thetas[0] if thetas else 0.1, cutoffs=cutoffs)

        def fft_against_brute():
            worst = 0.0
            for t in (1.5, 2.0, 3.0):
                kx, ky, weight = lattice_weight(base.theta, t)
                worst = max(worst, relative_defect(quartic_shell_sum(kx, ky, weight),
                                                   quartic_shell_sum_brute(kx, ky, weight)))
            return self.check("fft_matches_brute_force", worst, config.tolerance("identity"))

        def covariance_growth():
            worst = 0.0
            for theta in thetas:
                fit = covariance_exponent(theta)
                worst = max(worst, abs(fit.exponent - fit.expected))
            return self.check("covariance_exponent", worst, config.tolerance("slope"))

        def decay():
            worst = -np.inf
            for theta in thetas:
                fit = difference_decay(replace(base, theta=theta))
                self.report(f"difference_decay_slope_theta_{theta:g}", fit.exponent)
                if fit.expected <= -1.0:
                    worst = max(worst, fit.exponent)
            if not np.isfinite(worst):
                fit = difference_decay(replace(base, theta=0.1))
                worst = fit.exponent
            # Pilot threshold: the fit window sits before the asymptotic slope is reached.
            return self.check("difference_decay_below_half", worst, -0.5)

        def telescoping():
            spec = replace(base, mode_box=int(max(cutoffs)))
            ladder = sorted(cutoffs)
            pieces = sum(v_l2_difference(spec, s, t) for s, t in zip(ladder, ladder[1:]))
            whole = v_l2_norm_sq(spec, ladder[-1]) - v_l2_norm_sq(spec, ladder[0])
            return self.check("difference_telescoping", abs(pieces - whole) / max(1e-300, abs(whole)),
                              config.tolerance("identity"))

        def growth():
            _, fit = growth_table(base)
            expected = growth_exponent(base.theta, base.nu)
            return self.check("growth_exponent", abs(fit.slope - expected), config.tolerance("slope"))

        def partition():
            spec = replace(base, theta=min(base.theta, 0.1))
            series = partition_series(spec, 0.1, 2.0)
            self.check("partition_series_converges", float(series.converged), 1.0, upper=False)
            _, fit = partition_linear_fit(spec, PARTITION_COUPLINGS)
            return self.check("partition_linear_in_lambda", abs(fit.slope - 1.0), config.tolerance("slope"))

        def tiny_cutoff():
            tiny = tiny_cutoff_V([(0, 0), (1, 0)], mu=config.mu, theta=base.theta)
            self.check("tiny_cutoff_wick_norm", relative_defect(tiny.l2_norm_sq_wick(0.0), tiny.l2_norm_sq(0.0)),
                       config.tolerance("identity"))
            self.check("tiny_cutoff_self_adjoint", relative_defect(tiny.V, tiny.V.conj().T),
                       config.tolerance("identity"))
            return self.report("tiny_cutoff_sup_norm", tiny.sup_norm())

        def tiny_cutoff_lattice():
            tiny = tiny_cutoff_V(TINY_MOMENTA, mu=config.mu, theta=base.theta)
            worst = 0.0
            for tau in (0.0, 0.25):
                predicted = restricted_quartic_sum(TINY_MOMENTA, theta=base.theta, mu=config.mu, tau=tau)
                worst = max(worst, relative_defect(tiny.l2_norm_sq(tau), predicted))
            return self.check("tiny_cutoff_lattice_sum", worst, TINY_LATTICE_TOL)

        for name, body in [("fft_matches_brute_force", fft_against_brute), ("covariance_exponent", covariance_growth),
                           ("difference_decay", decay), ("difference_telescoping", telescoping),
                           ("growth_exponent", growth), ("partition_series", partition),
                           ("tiny_cutoff", tiny_cutoff), ("tiny_cutoff_lattice_sum", tiny_cutoff_lattice)]:
            self.guarded(name, body)
        return self.results

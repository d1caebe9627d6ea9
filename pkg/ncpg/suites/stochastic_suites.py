"""
Suites for the GBM, Itô calculus, Girsanov shift and SDE solvers.
"""

import os
import sys
from typing import Any, Dict, List

import numpy as np

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import anticommutator, random_operator, relative_defect, schatten_norm
from models.araki_wyss import state
from spaces.filtration import AdaptedSimpleProcess
from spaces.lp_spaces import twisted_embed
from stochastic.gbm import GBMSpec, build_gbm, c_prime, gbm_covariance_report, modular_weight_defect
from stochastic.girsanov import (bracket_compensator_defect, exponential_path, exponential_refinement_table,
                                 girsanov_moment_residual, girsanov_shift, levy_check, reserved_integrand,
                                 series_inverse_defect, signed_martingale_defect, stochastic_exponential,
                                 transform_martingale_defect)
from stochastic.ito import (ItoProcess, hardy_twisted_norm, ito_integral, ito_isometry_defect,
                            quadratic_variation, real_theta_basis, refinement_table, rotated_real_basis,
                            trace_pairing)
from stochastic.sde import (cubic_drift, linear_drift, ou_closed_form, ou_continuous_form,
                            path_difference, sde_strong_solve, sde_weak_represent)
from suites.algebra_suites import random_vector
from suites.base_suite import BaseSuite, CheckResult
from utils.fits import loglog_fit

ISOMETRY_TAUS = (0.0, 0.25, -0.25, 0.75, -0.75)


def random_adapted(gbm, rng: np.random.Generator) -> AdaptedSimpleProcess:
    """Scalar simple process with a random level-j operator on every cell."""
    filtration = gbm.filtration
    values = [filtration.embed_low(random_operator(rng, filtration.level_dim(j)), j) for j in range(gbm.n_t)]
    return AdaptedSimpleProcess(list(range(gbm.n_t + 1)), values)


class GBMSuite(BaseSuite):
    name = "gbm"

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        tol = config.tolerance("identity")
        spec = GBMSpec(mu=config.mu, n_t=config.n_t, T=config.T, h_dim=config.h_dim, n_reserved=0)
        gbm = build_gbm(spec, config.max_modes)
        h = spec.h_dim

        def covariance():
            worst = 0.0
            f, g = random_vector(rng, h), random_vector(rng, h)
            fields_f = [gbm.field(k, f) for k in range(gbm.n_t + 1)]
            fields_g = [gbm.field(k, g) for k in range(gbm.n_t + 1)]
            for t in range(gbm.n_t + 1):
                for s in range(gbm.n_t + 1):
                    measured = state(gbm.model, fields_f[t] @ fields_g[s])
                    worst = max(worst, abs(measured - gbm.covariance(t, s, f, g)))
            return self.check("covariance", worst, tol)

        def embeddings():
            f = random_vector(rng, h)
            return self.check("field_from_embeddings",
                              relative_defect(gbm.field_from_embeddings(gbm.n_t, f), gbm.field(gbm.n_t, f)), tol)

        def independent_increments():
            worst = 0.0
            f, g = random_vector(rng, h), random_vector(rng, h)
            for j in range(gbm.n_t):
                for k in range(gbm.n_t):
                    if j != k:
                        worst = max(worst, np.abs(anticommutator(gbm.increment(j, f), gbm.increment(k, g))).max())
            return self.check("increment_anticommutation", worst, tol)

        def modular_split():
            f = random_vector(rng, h)
            worst = max(modular_weight_defect(gbm, k, f, tau) for k in range(gbm.n_t) for tau in (0.25, -0.5, 1.0))
            return self.check("modular_eigen_split", worst, tol)

        def constants():
            report = gbm_covariance_report(gbm)
            self.check("covariance_constant", report.max_formula_defect, tol)
            self.report("stated_scaling_defect", report.max_scaling_defect)
            f = np.eye(h)[0]
            x = gbm.field(gbm.n_t, f)
            norm_cf = float(np.sum((spec.c_diag * np.abs(f)) ** 2))
            ratio = state(gbm.model, x.conj().T @ x).real / (gbm.n_t * spec.delta * norm_cf)
            return self.check("second_moment_constant", abs(ratio - c_prime(spec.mu, 0.0, 0.0)), tol)

        def increment_slope():
            f = np.eye(h)[0]
            widths, norms = [], []
            k = 1
            while k <= gbm.n_t:
                widths.append(k * spec.delta)
                norms.append(schatten_norm(twisted_embed(gbm.model, gbm.field_between(0, k, f), 2.0, 0.0), 2.0))
                k *= 2
            if len(widths) < 2:
                return self.report("increment_slope", None)
            fit = loglog_fit(widths, norms)
            return self.check("increment_slope", abs(fit.slope - 0.5), config.tolerance("slope"))

        def reserved_pair():
            paired = build_gbm(GBMSpec(mu=config.mu, n_t=1, T=config.T, h_dim=2, n_reserved=2), config.max_modes)
            value = state(paired.model, paired.reserved_generator(0) @ paired.reserved_generator(1))
            return self.check("reserved_pair_covariance", abs(value + 1.0), tol)

        for name, body in [("covariance", covariance), ("field_from_embeddings", embeddings),
                           ("increment_anticommutation", independent_increments),
                           ("modular_eigen_split", modular_split), ("constants", constants),
                           ("increment_slope", increment_slope), ("reserved_pair_covariance", reserved_pair)]:
            self.guarded(name, body)
        return self.results


class ItoSuite(BaseSuite):
    name = "ito"

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        tol = config.tolerance("identity")
        spec = GBMSpec(mu=config.mu, n_t=min(config.n_t, 3), T=config.T, h_dim=2, n_reserved=0)
        gbm = build_gbm(spec, config.max_modes)

        def isometry():
            worst = 0.0
            for _ in range(20):
                F = random_adapted(gbm, rng)
                v = random_vector(rng, 2)
                for tau in ISOMETRY_TAUS:
                    measured, predicted = ito_isometry_defect(gbm, F, v, tau)
                    worst = max(worst, abs(measured - predicted) / max(1e-300, abs(predicted)))
            return self.check("isometry", worst, config.tolerance("moment"))

        def martingale():
            F = random_adapted(gbm, rng)
            v = random_vector(rng, 2)
            path = [ito_integral(gbm, F, k, v) for k in range(gbm.n_t + 1)]
            worst = max(relative_defect(gbm.filtration.cond_exp(path[t], s), path[s])
                        for s in range(gbm.n_t) for t in range(s + 1, gbm.n_t + 1))
            return self.check("integral_martingale", worst, tol)

        def bracket():
            eye = np.eye(2)
            first, second = ItoProcess.along(gbm, eye[0]), ItoProcess.along(gbm, eye[1])
            value, defect = quadratic_variation(gbm, first, second, gbm.n_t)
            expected = spec.bilinear(eye[0], eye[1]) * spec.T * np.eye(gbm.dim)
            self.check("bracket_formula", relative_defect(value, expected), tol)
            return self.check("bracket_compensator", defect, config.tolerance("moment"))

        def basis_independence():
            dim = gbm.dim
            F_maps = [random_operator(rng, dim) for _ in range(2)]
            H_maps = [random_operator(rng, dim) for _ in range(2)]
            A = random_operator(rng, 2)
            values = []
            for basis in (real_theta_basis(2), rotated_real_basis(2, rng)):
                F = np.array([np.tensordot(v, F_maps, axes=1) for v in basis])
                H = np.array([np.tensordot(v, H_maps, axes=1) for v in basis])
                values.append(trace_pairing(basis, F, H, A))
            return self.check("trace_pairing_basis_independent", relative_defect(values[0], values[1]), tol)

        def hardy_bound():
            F = random_adapted(gbm, rng)
            v = np.eye(2)[0]
            norms = hardy_twisted_norm(gbm, F, 2.0, direction=v)
            return self.report("hardy_twisted_norm", norms.combined)

        def refinement():
            linear = refinement_table("linear", (1, 2, 4), config.mu, config.T)
            self.check("ito_formula_linear", float(linear["residual"].max()), tol)
            for scenario in ("quadratic", "cubic", "mixed"):
                table = refinement_table(scenario, (1, 2, 4), config.mu, config.T)
                self.check(f"ito_formula_{scenario}_ratio", float(table["ratio"].dropna().max()),
                           config.tolerance("refinement_ratio"))
            return self.results[-1]

        for name, body in [("isometry", isometry), ("integral_martingale", martingale), ("bracket", bracket),
                           ("trace_pairing_basis_independent", basis_independence), ("hardy_twisted_norm", hardy_bound),
                           ("ito_formula", refinement)]:
            self.guarded(name, body)
        return self.results


class GirsanovSuite(BaseSuite):
    name = "girsanov"

    LAMBDA = 0.3

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        tol = config.tolerance("moment")
        spec = GBMSpec(mu=config.mu, n_t=min(config.n_t, 2), T=config.T, h_dim=2, n_reserved=2)
        gbm = build_gbm(spec, config.max_modes)
        eye = np.eye(2)
        H = reserved_integrand(gbm, [(0, eye[0]), (1, eye[1])], self.LAMBDA)
        shift, se = girsanov_shift(gbm, H)

        def exponential():
            result = stochastic_exponential(gbm, H)
            self.check("series_matches_expm", result.expm_defect, config.tolerance("identity"))
            self.check("series_inverse", series_inverse_defect(result), config.tolerance("identity"))
            path = exponential_path(gbm, H)
            worst = max(relative_defect(se.density(j), path[j]) for j in range(gbm.n_t + 1))
            return self.check("density_martingale", worst, tol)

        def shifted_martingales():
            v = random_vector(rng, 2)
            self.check("shifted_field_martingale", signed_martingale_defect(se, shift.field, v, gbm.n_t), tol)
            self.check("bracket_preserved", bracket_compensator_defect(shift, se, eye[0], eye[1]), tol)
            left = [gbm.filtration.embed_low(random_operator(rng, gbm.filtration.level_dim(j)), j)
                    for j in range(gbm.n_t)]
            return self.check("transform_martingale", transform_martingale_defect(shift, se, left, v), tol)

        def moments():
            top = gbm.n_t
            points = [[(top, eye[0]), (top, eye[1])],
                      [(1, eye[0]), (top, eye[1]), (top, eye[0]), (1, eye[1])]]
            worst = max(girsanov_moment_residual(shift, se, p) for p in points)
            return self.check("shifted_moments", worst, tol)

        def levy():
            report = levy_check(gbm, shift.field, se, [eye[0], eye[1]])
            self.check("levy_shifted", report.max_deviation, tol)
            control = levy_check(gbm, gbm.field, se, [eye[0], eye[1]])
            return self.check("levy_unshifted_detects_drift", control.max_deviation, 1e-6, upper=False)

        def equation_table():
            table = exponential_refinement_table((1, 2), config.mu, config.T, self.LAMBDA)
            return self.report("exponential_equation_ratio", float(table["ratio"].dropna().iloc[-1]))

        for name, body in [("exponential", exponential), ("shifted_martingales", shifted_martingales),
                           ("shifted_moments", moments), ("levy", levy),
                           ("exponential_equation_ratio", equation_table)]:
            self.guarded(name, body)
        return self.results


class SDESuite(BaseSuite):
    name = "sde"

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        tol = config.tolerance("moment")
        spec = GBMSpec(mu=config.mu, n_t=min(config.n_t, 2), T=config.T, h_dim=2, n_reserved=2)
        gbm = build_gbm(spec, config.max_modes)
        A = 0.5 * rng.standard_normal((2, 2))

        def zero_drift():
            solution = sde_strong_solve(gbm, linear_drift(np.zeros((2, 2))))
            return self.check("zero_drift_closed_form",
                              path_difference(solution.path, ou_closed_form(gbm, np.zeros((2, 2)))), tol)

        def linear():
            solution = sde_strong_solve(gbm, linear_drift(A))
            self.check("linear_drift_closed_form", path_difference(solution.path, ou_closed_form(gbm, A)), tol)
            return self.report("discrete_vs_continuous_ou",
                               path_difference(ou_closed_form(gbm, A), ou_continuous_form(gbm, A)))

        def cubic():
            wide = build_gbm(GBMSpec(mu=config.mu, n_t=2, T=config.T, h_dim=4, n_reserved=0), config.max_modes)
            solution = sde_strong_solve(wide, cubic_drift(0.3 * np.eye(4), 0.5), tol=1e-10, max_iterations=30)
            self.report("cubic_picard_iterations", solution.iterations)
            return self.check("cubic_picard_residual", solution.residual, 1e-8)

        def weak():
            representation = sde_weak_represent(gbm, linear_drift(A, A + 0.25 * np.eye(2)))
            return self.check("weak_representation", representation.max_residual, 1e-8)

        for name, body in [("zero_drift_closed_form", zero_drift), ("linear_drift_closed_form", linear),
                           ("cubic_picard", cubic), ("weak_representation", weak)]:
            self.guarded(name, body)
        return self.results

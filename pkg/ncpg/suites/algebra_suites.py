"""
Suites for the operator kernel, the CAR representation and the quasi-free model.
"""

import itertools
import os
import sys
from typing import Any, Dict, List

import numpy as np
from scipy import linalg

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from config.settings import RunConfig
from kernel.car_fock import FockBasis, annihilator, creator, second_quantization, wedge_vector
from kernel.matchings import signed_matching_sum
from kernel.operator_kernel import (PositiveOperator, anticommutator, matrix_function, psd_sqrt,
                                    random_operator, relative_defect, schatten_norm)
from models.araki_wyss import (QuasiFreeModel, beta, build_model, gamma, gamma_star, k_unit, kms_defect,
                               modular_flow, oracle_moment_defect, ou_lp_map, hyper_norm_estimate,
                               hyper_threshold, state, wick, wick_gram)
from suites.base_suite import BaseSuite, CheckResult


def suite_model(config: RunConfig, d: int = None) -> QuasiFreeModel:
    """A model with a graded ρ-spectrum μ^{1+i/4}, so modes are not all alike."""
    d = config.d if d is None else d
    return build_model([config.mu ** (1.0 + 0.25 * i) for i in range(d)])


def random_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


class KernelSuite(BaseSuite):
    name = "kernel"

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        tol = config.tolerance("identity")
        dim = 8

        def schatten_monotone():
            worst = 0.0
            for _ in range(50):
                a = random_operator(rng, dim)
                worst = max(worst, schatten_norm(a, 4) - schatten_norm(a, 2), schatten_norm(a, np.inf) - schatten_norm(a, 4))
            return self.check("schatten_monotone", worst, tol)

        def schatten_holder():
            worst = 0.0
            for _ in range(50):
                a, b = random_operator(rng, dim), random_operator(rng, dim)
                worst = max(worst, schatten_norm(a @ b, 1) - schatten_norm(a, 2) * schatten_norm(b, 2))
            return self.check("schatten_holder", worst, tol)

        def power_additivity():
            h = random_operator(rng, dim, hermitian=True)
            w = PositiveOperator(linalg.expm(h))
            defect = relative_defect(w.power(0.3) @ w.power(0.45), w.power(0.75))
            return self.check("frac_power_additivity", defect, tol)

        def sqrt_square():
            a = random_operator(rng, dim)
            positive = a.conj().T @ a
            root = psd_sqrt(positive)
            return self.check("psd_sqrt_square", relative_defect(root @ root, positive), tol)

        def function_calculus():
            h = random_operator(rng, dim, hermitian=True)
            return self.check("matrix_function_exp", relative_defect(matrix_function(h, np.exp), linalg.expm(h)), tol)

        for name, body in [("schatten_monotone", schatten_monotone), ("schatten_holder", schatten_holder),
                           ("frac_power_additivity", power_additivity), ("psd_sqrt_square", sqrt_square),
                           ("matrix_function_exp", function_calculus)]:
            self.guarded(name, body)
        return self.results


class CarSuite(BaseSuite):
    name = "car"

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        tol = config.tolerance("exact")
        m = min(config.d, 4)
        basis = FockBasis(m)
        eye = np.eye(basis.dim)

        def anticommutation():
            worst = 0.0
            for _ in range(100):
                f, g = random_vector(rng, m), random_vector(rng, m)
                mixed = anticommutator(annihilator(basis, f), creator(basis, g)) - np.vdot(f, g) * eye
                pure = anticommutator(annihilator(basis, f), annihilator(basis, g))
                scale = max(1.0, np.linalg.norm(f) * np.linalg.norm(g))
                worst = max(worst, np.abs(mixed).max() / scale, np.abs(pure).max() / scale)
            return self.check("car_relations", worst, tol)

        def wedge_gram():
            vectors = [random_vector(rng, m) for _ in range(min(m, 3))]
            psi = wedge_vector(basis, vectors)
            gram = np.array([[np.vdot(f, g) for g in vectors] for f in vectors])
            defect = abs(np.vdot(psi, psi) - np.linalg.det(gram)) / max(1.0, abs(np.linalg.det(gram)))
            return self.check("wedge_gram_determinant", defect, config.tolerance("identity"))

        def functoriality():
            a = random_operator(rng, m)
            b = random_operator(rng, m)
            defect = relative_defect(second_quantization(basis, a @ b),
                                     second_quantization(basis, a) @ second_quantization(basis, b))
            return self.check("second_quantization_functorial", defect, config.tolerance("identity"))

        for name, body in [("car_relations", anticommutation), ("wedge_gram_determinant", wedge_gram),
                           ("second_quantization_functorial", functoriality)]:
            self.guarded(name, body)
        return self.results


class QuasiFreeSuite(BaseSuite):
    name = "quasi_free"

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        model = suite_model(config, min(config.d, 4))
        d = model.d

        def two_point():
            worst = 0.0
            for _ in range(100):
                f, g = random_vector(rng, d), random_vector(rng, d)
                scale = max(1.0, np.linalg.norm(f) * np.linalg.norm(g))
                lower = state(model, gamma_star(model, f) @ gamma(model, g)) - np.vdot(g, model.rho ** -2 * f)
                upper = state(model, gamma(model, g) @ gamma_star(model, f)) - np.vdot(g, model.rho ** 2 * f)
                worst = max(worst, abs(lower) / scale, abs(upper) / scale)
            return self.check("two_point_function", worst, config.tolerance("exact"))

        def higher_moments():
            worst = 0.0
            for n in (4, 6):
                for _ in range(10):
                    ops = [beta(model, random_vector(rng, 2 * d)) for _ in range(n)]
                    product = model.identity()
                    for op in ops:
                        product = product @ op
                    predicted = signed_matching_sum(lambda i, j: state(model, ops[i] @ ops[j]), n)
                    worst = max(worst, abs(state(model, product) - predicted) / max(1.0, abs(predicted)))
            return self.check("matching_moments", worst, config.tolerance("moment"))

        def oracle():
            small = suite_model(config, min(d, 2))
            return self.check("doubled_gns_oracle", oracle_moment_defect(small, 4), config.tolerance("identity"))

        for name, body in [("two_point_function", two_point), ("matching_moments", higher_moments),
                           ("doubled_gns_oracle", oracle)]:
            self.guarded(name, body)
        return self.results


class WickModularSuite(BaseSuite):
    name = "wick_modular"

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        tol = config.tolerance("identity")
        model = suite_model(config, min(config.d, 3))
        d = model.d

        def gram():
            basis = model.wick_basis
            return self.check("wick_gram_orthonormal", np.abs(basis.gram() - np.eye(len(basis.legs))).max(), tol)

        def completeness():
            basis = model.wick_basis
            x = random_operator(rng, model.dim)
            return self.check("wick_completeness", relative_defect(basis.recompose(basis.decompose(x)), x), tol)

        def gram_determinant():
            worst = 0.0
            for tau in (0.0, 0.25, 0.5):
                left = [random_vector(rng, 2 * d) for _ in range(2)]
                right = [random_vector(rng, 2 * d) for _ in range(2)]
                dense = state(model, wick(model, left).conj().T @ modular_flow(model, wick(model, right), tau))
                worst = max(worst, abs(dense - wick_gram(model, left, right, tau)) / max(1.0, abs(dense)))
            return self.check("wick_gram_determinant", worst, tol)

        def kms():
            worst = 0.0
            for _ in range(100):
                x, y = random_operator(rng, model.dim), random_operator(rng, model.dim)
                worst = max(worst, kms_defect(model, x, y))
            return self.check("kms_condition", worst, config.tolerance("moment"))

        def flow_group():
            x = random_operator(rng, model.dim)
            composed = modular_flow(model, modular_flow(model, x, 0.3), 0.2)
            return self.check("modular_group_law", relative_defect(composed, modular_flow(model, x, 0.5)), tol)

        for name, body in [("wick_gram_orthonormal", gram), ("wick_completeness", completeness),
                           ("wick_gram_determinant", gram_determinant), ("kms_condition", kms),
                           ("modular_group_law", flow_group)]:
            self.guarded(name, body)
        return self.results


class HyperSuite(BaseSuite):
    name = "hyper"

    P = 4.0 / 3.0
    Q = 2.0

    def contractive_time(self, mu: float) -> float:
        """t with e^{-2t} = 0.1·μ^{8/p-4}(p-1)."""
        return -0.5 * np.log(0.1 * mu ** (8.0 / self.P - 4.0) * (self.P - 1.0))

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        model = build_model([config.mu] * 2)
        seed = int(rng.integers(2 ** 32))

        def wick_eigen_identity():
            worst = 0.0
            t = 0.4
            for legs in itertools.combinations(range(4), 2):
                monomial = wick(model, [k_unit(model, leg) for leg in legs])
                for tau in (0.0, 0.1):
                    source = model.sandwich(monomial, 0.5 / self.P + tau, 0.5 / self.P - tau)
                    target = model.sandwich(monomial, 0.5 / self.Q + tau, 0.5 / self.Q - tau)
                    image = ou_lp_map(model, source, t, self.P, self.Q, tau)
                    worst = max(worst, relative_defect(np.exp(t * len(legs)) * image, target))
            return self.check("ou_wick_eigen_identity", worst, config.tolerance("identity"))

        def contraction():
            t = self.contractive_time(config.mu)
            estimate, _ = hyper_norm_estimate(model, t, self.P, self.Q, probes=500, seed=seed)
            return self.check("hypercontractive_norm", estimate - 1.0, 1e-6)

        def threshold():
            t_star, _ = hyper_threshold(model, self.P, self.Q, np.linspace(0.05, 1.0, 8), probes=60, seed=seed)
            return self.report("empirical_threshold", t_star)

        for name, body in [("ou_wick_eigen_identity", wick_eigen_identity), ("hypercontractive_norm", contraction),
                           ("empirical_threshold", threshold)]:
            self.guarded(name, body)
        return self.results

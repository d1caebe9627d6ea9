"""
Suites for twisted L^p norms, spectral laws and filtrations.
"""

import os
import sys
from typing import Any, Dict, List

import numpy as np

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from kernel.operator_kernel import is_psd, random_operator, relative_defect
from models.araki_wyss import modular_flow, state
from spaces.filtration import (AdaptedSimpleProcess, Filtration, hardy_norms, martingale_from_terminal,
                               q_sigma)
from spaces.lp_spaces import (TwistedElement, expectation_extend, haagerup_trace, lp_product, spectral_law,
                              twisted_norm, twisted_norm_profile)
from suites.algebra_suites import suite_model
from suites.base_suite import BaseSuite, CheckResult

HOLDER_TRIPLES = ((2.0, 2.0, 1.0), (4.0, 4.0, 2.0), (3.0, 6.0, 2.0), (np.inf, 4.0, 4.0))


class LpSuite(BaseSuite):
    name = "lp"

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        model = suite_model(config, min(config.d, 3))
        dim = model.dim

        def holder():
            violations = 0
            for p, q, _ in HOLDER_TRIPLES:
                for _ in range(50):
                    x = TwistedElement(model, random_operator(rng, dim), p)
                    y = TwistedElement(model, random_operator(rng, dim), q)
                    product = lp_product(x, y)
                    if product.norm() > product.holder_bound * (1.0 + 1e-9):
                        violations += 1
            return self.check("holder_violations", violations, 0)

        def unit_norm():
            worst = max(abs(twisted_norm(model, model.identity(), p) - 1.0) for p in (1.0, 2.0, 4.0, np.inf))
            return self.check("unit_norm", worst, config.tolerance("exact"))

        def monotone():
            worst = 0.0
            for _ in range(50):
                x = random_operator(rng, dim)
                worst = max(worst, twisted_norm(model, x, 2.0) - twisted_norm(model, x, 4.0))
            return self.check("lp_monotone", worst, config.tolerance("identity"))

        def star_invariance():
            worst = 0.0
            for _ in range(20):
                x = random_operator(rng, dim)
                worst = max(worst, abs(twisted_norm(model, x, 3.0) - twisted_norm(model, x.conj().T, 3.0)))
            return self.check("star_invariance", worst, config.tolerance("identity"))

        def guard():
            worst = 0.0
            for _ in range(30):
                x = random_operator(rng, dim)
                for p in (1.0, 2.0, 4.0):
                    worst = max(worst, twisted_norm_profile(model, x, p).guard_excess)
            return self.check("endpoint_guard", worst, 1e-9)

        def expectation():
            worst = 0.0
            for _ in range(30):
                value, bound = expectation_extend(model, TwistedElement(model, random_operator(rng, dim), 1.0))
                worst = max(worst, abs(value) - bound)
            return self.check("expectation_continuity", worst, config.tolerance("identity"))

        def trace_property():
            x, y = random_operator(rng, dim), random_operator(rng, dim)
            return self.check("haagerup_trace_cyclic", abs(haagerup_trace(x @ y) - haagerup_trace(y @ x)),
                              config.tolerance("identity"))

        for name, body in [("holder_violations", holder), ("unit_norm", unit_norm), ("lp_monotone", monotone),
                           ("star_invariance", star_invariance), ("endpoint_guard", guard),
                           ("expectation_continuity", expectation), ("haagerup_trace_cyclic", trace_property)]:
            self.guarded(name, body)
        return self.results


class SpectralSuite(BaseSuite):
    name = "spectral"

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        model = suite_model(config, min(config.d, 3))
        tol = config.tolerance("identity")
        samples = [random_operator(rng, model.dim, hermitian=True) for _ in range(100)]
        laws = [spectral_law(model, x) for x in samples]

        def normalization():
            return self.check("weights_sum_to_one", max(abs(law.total_weight() - 1.0) for law in laws), tol)

        def second_moment():
            worst = max(abs(law.moment(2) - state(model, x @ x)) for law, x in zip(laws, samples))
            return self.check("second_moment", worst, tol)

        def moment_inequality():
            violations = 0
            for law, x in zip(laws, samples):
                for n in (1, 2):
                    if law.absolute_moment(2 * n) > twisted_norm(model, x, 2 * n) ** (2 * n) * (1.0 + 1e-9):
                        violations += 1
            return self.check("moment_inequality_violations", violations, 0)

        def reflection():
            x = samples[0]
            reflected = spectral_law(model, -x)
            worst = max(abs(a[0] - b[0]) + abs(a[1] - b[1]) for a, b in zip(reflected.atoms, laws[0].reflect().atoms))
            return self.check("reflection", worst, tol)

        for name, body in [("weights_sum_to_one", normalization), ("second_moment", second_moment),
                           ("moment_inequality_violations", moment_inequality), ("reflection", reflection)]:
            self.guarded(name, body)
        return self.results


class FiltrationSuite(BaseSuite):
    name = "filtration"

    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        config, rng = context["config"], context["rng"]
        tol = config.tolerance("identity")
        model = suite_model(config, min(max(config.d, 3), 4))
        filtration = Filtration(model, list(range(model.d + 1)))
        dim = model.dim
        levels = range(filtration.n_levels)

        def low(level):
            return filtration.embed_low(random_operator(rng, filtration.level_dim(level)), level)

        def axioms():
            unital = module = schwarz = preserve = modular = 0.0
            for level in levels:
                unital = max(unital, relative_defect(filtration.cond_exp(model.identity(), level), model.identity()))
                for _ in range(10):
                    x = random_operator(rng, dim)
                    a, b = low(level), low(level)
                    e = filtration.cond_exp(x, level)
                    module = max(module, relative_defect(filtration.cond_exp(a @ x @ b, level), a @ e @ b))
                    gap = filtration.cond_exp(x.conj().T @ x, level) - e.conj().T @ e
                    schwarz = max(schwarz, 0.0 if is_psd(gap) else 1.0)
                    preserve = max(preserve, abs(state(model, e) - state(model, x)))
                    modular = max(modular, relative_defect(filtration.cond_exp(modular_flow(model, x, 0.3), level),
                                                           modular_flow(model, e, 0.3)))
            self.check("unital", unital, tol)
            self.check("module_property", module, tol)
            self.check("schwarz_psd", schwarz, 0)
            self.check("state_preserving", preserve, tol)
            return self.check("modular_invariance", modular, tol)

        def duality():
            worst = 0.0
            p, p_dual = 3.0, 1.5
            for level in levels:
                a = model.sandwich(random_operator(rng, dim), 0.5 / p, 0.5 / p)
                b = model.sandwich(random_operator(rng, dim), 0.5 / p_dual, 0.5 / p_dual)
                left = np.trace(filtration.cond_exp_lp(a, level, p) @ b)
                right = np.trace(a @ filtration.cond_exp_lp(b, level, p_dual))
                worst = max(worst, abs(left - right))
            return self.check("lp_duality", worst, tol)

        def methods_agree():
            worst = 0.0
            x = random_operator(rng, dim)
            for level in levels:
                worst = max(worst, relative_defect(filtration.cond_exp(x, level, "wick"), filtration.cond_exp(x, level)))
            return self.check("slice_matches_wick_truncation", worst, tol)

        def q_sigma_idempotent():
            n = filtration.n_levels - 1
            values = [random_operator(rng, dim) for _ in range(n)]
            values = [filtration.cond_exp(v, j) for j, v in enumerate(values)]
            process = AdaptedSimpleProcess(list(range(n + 1)), values)
            sigma = [0, n // 2, n] if n >= 2 else [0, n]
            once = q_sigma(filtration, process, sigma)
            twice = q_sigma(filtration, once, sigma)
            return self.check("q_sigma_idempotent", float(np.abs(once.values - twice.values).max()), tol)

        def hardy_ratios():
            x = model.sandwich(random_operator(rng, dim), 0.125, 0.125)
            martingale = martingale_from_terminal(filtration, x, 4.0)
            norms = hardy_norms(filtration, martingale.differences(), 4.0)
            terminal = martingale.norms()[-1]
            self.report("burkholder_ratio", norms.h_norm / terminal if terminal else None)
            return self.report("stein_ratio", norms.H_norm / terminal if terminal else None)

        for name, body in [("axioms", axioms), ("lp_duality", duality), ("slice_matches_wick_truncation", methods_agree),
                           ("q_sigma_idempotent", q_sigma_idempotent), ("hardy_ratios", hardy_ratios)]:
            self.guarded(name, body)
        return self.results

import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from config.settings import ALL_SUITES, RunConfig
from suites.base_suite import BaseSuite
from suites.verify_orchestrator import SUITE_REGISTRY, VerifyOrchestrator, report_passed, suite_generator
from utils.error_handlers import ConfigError, SingularityError


class ScriptedSuite(BaseSuite):
    name = "scripted"

    def execute(self, context):
        self.check("small", 1e-12, 1e-10)
        self.check("large", 1.0, 1e-10)
        self.check("lower_bound", 0.5, 0.1, upper=False)
        self.check("not_a_number", float("nan"), 1.0)
        self.report("reported", 3.0)
        self.guarded("raises", self._singular)
        return self.results

    def _singular(self):
        raise SingularityError("matrix is singular")


class TestBaseSuite:
    """Test cases for check bookkeeping."""

    def test_statuses(self):
        results = ScriptedSuite().run({"config": RunConfig(), "rng": np.random.default_rng(0)})
        statuses = {result.check: result.status for result in results}
        assert statuses == {"small": "pass", "large": "fail", "lower_bound": "pass", "not_a_number": "fail",
                            "reported": "report", "raises": "error"}
        assert results[3].measured is None
        assert results[4].tolerance is None

    def test_run_resets_results(self):
        suite = ScriptedSuite()
        context = {"config": RunConfig(), "rng": np.random.default_rng(0)}
        suite.run(context)
        assert len(suite.run(context)) == 6

    def test_foreign_errors_propagate(self):
        suite = ScriptedSuite()
        with pytest.raises(ZeroDivisionError):
            suite.guarded("boom", lambda: 1 / 0)

    def test_records_are_plain_dicts(self):
        results = ScriptedSuite().run({"config": RunConfig(), "rng": np.random.default_rng(0)})
        assert set(results[0].to_record()) == {"suite", "check", "status", "measured", "tolerance"}


class TestOrchestrator:
    """Test cases for the verify pipeline."""

    def test_registry_covers_every_suite(self):
        assert sorted(SUITE_REGISTRY) == sorted(ALL_SUITES)

    def test_suite_generators_are_deterministic(self):
        first = suite_generator(7, "gbm").standard_normal(4)
        again = suite_generator(7, "gbm").standard_normal(4)
        other = suite_generator(7, "ito").standard_normal(4)
        assert np.array_equal(first, again)
        assert not np.array_equal(first, other)

    def test_empty_selection(self):
        state = VerifyOrchestrator().invoke(RunConfig(suites=[]))
        assert state["records"] == []
        assert state["valid"]

    def test_unknown_suite(self):
        with pytest.raises(ConfigError):
            VerifyOrchestrator().invoke(RunConfig(suites=["bogus"]))

    def test_kernel_suite_passes(self):
        state = VerifyOrchestrator().invoke(RunConfig(suites=["kernel", "kernel"]))
        records = state["records"]
        assert records
        assert {record["suite"] for record in records} == {"kernel"}
        assert report_passed(records)

    def test_report_is_reproducible(self):
        config = RunConfig(suites=["kernel"], seed=3)
        first = VerifyOrchestrator().invoke(config)["records"]
        second = VerifyOrchestrator().invoke(config)["records"]
        assert first == second

    def test_report_passed(self):
        assert report_passed([{"status": "pass"}, {"status": "report"}])
        assert not report_passed([{"status": "pass"}, {"status": "error"}])

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["car", "quasi_free", "lp", "filtration", "gbm"])
    def test_suite_passes(self, name):
        config = RunConfig(suites=[name], n_t=2)
        assert report_passed(VerifyOrchestrator().invoke(config)["records"])

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["wick_modular", "hyper", "spectral", "ito", "girsanov", "sde", "phi4"])
    def test_suite_passes_at_default_config(self, name):
        records = VerifyOrchestrator().invoke(RunConfig(suites=[name]))["records"]
        assert records
        failing = [record["check"] for record in records if record["status"] in ("fail", "error")]
        assert failing == []

    @pytest.mark.slow
    def test_phi4_checks_operator_against_lattice(self):
        records = VerifyOrchestrator().invoke(RunConfig(suites=["phi4"]))["records"]
        statuses = {record["check"]: record["status"] for record in records}
        assert statuses["tiny_cutoff_lattice_sum"] == "pass"
        assert statuses["difference_decay_below_half"] == "pass"

    @pytest.mark.slow
    def test_threads_keep_selection_order(self):
        config = RunConfig(suites=["car", "kernel"], threads=2)
        records = VerifyOrchestrator().invoke(config)["records"]
        suites = [record["suite"] for record in records]
        assert suites == sorted(suites, key=["car", "kernel"].index)

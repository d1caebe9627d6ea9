from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Type, TypedDict
import logging
import os
import sys

import numpy as np
from langgraph.graph import END, StateGraph

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from config.settings import ALL_SUITES, RunConfig
from suites.algebra_suites import CarSuite, HyperSuite, KernelSuite, QuasiFreeSuite, WickModularSuite
from suites.base_suite import BaseSuite, CheckResult
from suites.lattice_suite import Phi4Suite
from suites.space_suites import FiltrationSuite, LpSuite, SpectralSuite
from suites.stochastic_suites import GBMSuite, GirsanovSuite, ItoSuite, SDESuite
from utils.error_handlers import ConfigError
from utils.validators import is_valid_report

SUITE_REGISTRY: Dict[str, Type[BaseSuite]] = {
    suite.name: suite for suite in (
        KernelSuite, CarSuite, QuasiFreeSuite, WickModularSuite, HyperSuite, LpSuite, SpectralSuite,
        FiltrationSuite, GBMSuite, ItoSuite, GirsanovSuite, SDESuite, Phi4Suite,
    )
}


def suite_generator(seed: int, name: str) -> np.random.Generator:
    """
    The generator of one suite, spawned from the run seed.

    Children are indexed by the suite's position in ALL_SUITES, so a suite
    draws the same stream whether it runs alone or with the others.
    """
    children = np.random.SeedSequence(seed).spawn(len(ALL_SUITES))
    return np.random.default_rng(children[ALL_SUITES.index(name)])


class VerifyState(TypedDict):
    """State passed between the nodes of the verify graph."""
    config: RunConfig
    selected: Optional[List[str]]
    results: Optional[Dict[str, List[CheckResult]]]
    records: Optional[List[Dict[str, Any]]]
    valid: Optional[bool]


class VerifyOrchestrator:
    """
    Runs the selected invariant suites and assembles the verify report.

    Suites run concurrently on a thread pool sized by config.threads; the
    report is assembled on the calling thread in suite-selection order.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.graph = self._build_graph()

    def _load(self, state: VerifyState) -> Dict[str, Any]:
        """Resolves the suite selection, rejecting unknown names."""
        selected = []
        for name in state["config"].suites:
            if name not in SUITE_REGISTRY:
                raise ConfigError(f"unknown suite '{name}'; known suites: {', '.join(ALL_SUITES)}")
            if name not in selected:
                selected.append(name)
        self.logger.info(f"Selected suites: {', '.join(selected) or '(none)'}")
        return {"selected": selected}

    def _run_one(self, config: RunConfig, name: str) -> List[CheckResult]:
        suite = SUITE_REGISTRY[name]()
        self.logger.info(f"Running suite '{name}'...")
        results = suite.run({"config": config, "rng": suite_generator(config.seed, name)})
        failed = sum(result.status in ("fail", "error") for result in results)
        self.logger.info(f"Suite '{name}' finished: {len(results)} checks, {failed} failed")
        return results

    def _run_suites(self, state: VerifyState) -> Dict[str, Any]:
        config = state["config"]
        selected = state["selected"]
        if not selected:
            return {"results": {}}
        workers = max(1, min(config.threads, len(selected)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {name: pool.submit(self._run_one, config, name) for name in selected}
            results = {name: future.result() for name, future in futures.items()}
        return {"results": results}

    def _assemble(self, state: VerifyState) -> Dict[str, Any]:
        records = [result.to_record() for name in state["selected"] for result in state["results"][name]]
        valid = is_valid_report(records)
        if not valid:
            self.logger.error("Assembled report does not match the report schema.")
        return {"records": records, "valid": valid}

    def _build_graph(self):
        workflow = StateGraph(VerifyState)

        workflow.add_node("load", self._load)
        workflow.add_node("run_suites", self._run_suites)
        workflow.add_node("assemble", self._assemble)

        workflow.set_entry_point("load")
        workflow.add_edge("load", "run_suites")
        workflow.add_edge("run_suites", "assemble")
        workflow.add_edge("assemble", END)

        return workflow.compile()

    def invoke(self, config: RunConfig) -> Dict[str, Any]:
        """
        Runs the full verify pipeline.

        Args:
            config: A validated run configuration.

        Returns:
            The final graph state; `records` holds the report rows.

        Raises:
            ConfigError: If the suite selection names an unknown suite.
        """
        return self.graph.invoke({"config": config, "selected": None, "results": None,
                                  "records": None, "valid": None})


def report_passed(records: List[Dict[str, Any]]) -> bool:
    """True when no record has status fail or error."""
    return all(record["status"] not in ("fail", "error") for record in records)

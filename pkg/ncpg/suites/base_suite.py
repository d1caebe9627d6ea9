import logging
import os
import sys
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from utils.error_handlers import NcpgError


@dataclass
class CheckResult:
    """One row of a verify report."""
    suite: str
    check: str
    status: str
    measured: Optional[float]
    tolerance: Optional[float]

    def to_record(self) -> Dict[str, Any]:
        return asdict(self)


def _as_number(value) -> Optional[float]:
    if value is None:
        return None
    value = float(np.real(value))
    return value if np.isfinite(value) else None


class BaseSuite(ABC):
    """
    Abstract base class for all invariant suites.

    A suite receives the run context (configuration and its own seeded
    generator), evaluates its checks and returns one CheckResult per check.
    """

    name: str = "base"

    def __init__(self):
        self.logger = logging.getLogger(f"{__name__}.{self.name}")
        self.results: List[CheckResult] = []

    def check(self, check: str, measured, tolerance: float, upper: bool = True) -> CheckResult:
        """
        Records a bounded check: pass when measured ≤ tolerance (≥ when upper is False).
        """
        value = _as_number(measured)
        if value is None:
            status = "fail"
        else:
            status = "pass" if (value <= tolerance if upper else value >= tolerance) else "fail"
        return self._record(CheckResult(self.name, check, status, value, float(tolerance)))

    def report(self, check: str, measured) -> CheckResult:
        """Records a value that is reported but never fails the run."""
        return self._record(CheckResult(self.name, check, "report", _as_number(measured), None))

    def error(self, check: str, exc: Exception) -> CheckResult:
        self.logger.error(f"{self.name}/{check} raised {type(exc).__name__}: {exc}")
        return self._record(CheckResult(self.name, check, "error", None, None))

    def guarded(self, check: str, body: Callable[[], Any]) -> Any:
        """Runs one check body; a library error marks the check as `error` instead of aborting the suite."""
        try:
            return body()
        except NcpgError as exc:
            return self.error(check, exc)

    def _record(self, result: CheckResult) -> CheckResult:
        self.results.append(result)
        self.logger.info(f"{result.suite}/{result.check}: measured={result.measured} "
                         f"tolerance={result.tolerance} status={result.status}")
        return result

    def run(self, context: Dict[str, Any]) -> List[CheckResult]:
        self.results = []
        return self.execute(context)

    @abstractmethod
    def execute(self, context: Dict[str, Any]) -> List[CheckResult]:
        """
        Evaluates the suite's checks.

        Args:
            context: Run context with 'config' (RunConfig) and 'rng' (np.random.Generator).

        Returns:
            The list of check results, in evaluation order.
        """
        pass

import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from utils.error_handlers import InvalidInputError, ensure_finite
from utils.fits import linear_fit, loglog_fit
from utils.validators import is_valid_check_record, is_valid_report, load_report_schema


def record(**changes):
    base = {"suite": "gbm", "check": "covariance", "status": "pass", "measured": 1e-14, "tolerance": 1e-10}
    base.update(changes)
    return base


class TestReportValidation:
    """Test cases for verify-report validation."""

    def test_valid_record(self):
        assert is_valid_check_record(record(), load_report_schema())

    def test_report_record_without_tolerance(self):
        assert is_valid_check_record(record(status="report", tolerance=None), load_report_schema())

    @pytest.mark.parametrize("changes", [
        {"status": "maybe"},
        {"measured": "small"},
        {"measured": float("nan")},
        {"suite": 3},
        {"measured": True},
    ])
    def test_invalid_records(self, changes):
        assert not is_valid_check_record(record(**changes), load_report_schema())

    def test_missing_key(self):
        broken = record()
        del broken["tolerance"]
        assert not is_valid_check_record(broken, load_report_schema())

    def test_reports(self):
        assert is_valid_report([])
        assert is_valid_report([record(), record(status="error", measured=None, tolerance=None)])
        assert not is_valid_report({"records": []})


class TestFits:
    """Test cases for exponent fits."""

    def test_power_law_slope(self):
        x = np.array([2.0, 4.0, 8.0, 16.0])
        fit = loglog_fit(x, 3.0 * x ** -1.5)
        assert fit.slope == pytest.approx(-1.5)
        assert np.exp(fit.intercept) == pytest.approx(3.0)
        assert fit.r2 == pytest.approx(1.0)

    def test_line_predict(self):
        fit = linear_fit([0.0, 1.0, 2.0], [1.0, 3.0, 5.0])
        assert fit.predict([3.0]) == pytest.approx([7.0])

    def test_log_fit_needs_positive_data(self):
        with pytest.raises(InvalidInputError):
            loglog_fit([1.0, 2.0], [1.0, -1.0])

    def test_line_needs_two_points(self):
        with pytest.raises(InvalidInputError):
            linear_fit([1.0], [1.0])

    def test_ensure_finite(self):
        with pytest.raises(InvalidInputError):
            ensure_finite([1.0, np.inf], "values")
        assert ensure_finite([1.0, 2.0], "values").shape == (2,)

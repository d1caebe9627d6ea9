"""
Straight-line fits for growth and decay exponents.
"""

import logging
import os
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.linear_model import LinearRegression

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from utils.error_handlers import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass
class LineFit:
    slope: float
    intercept: float
    r2: float

    def predict(self, x) -> np.ndarray:
        return self.intercept + self.slope * np.asarray(x, dtype=float)


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LineFit:
    """Least-squares line y ≈ intercept + slope·x."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    y = np.asarray(y, dtype=float)
    if x.shape[0] < 2:
        raise InvalidInputError("a line fit needs at least two points")
    model = LinearRegression().fit(x, y)
    return LineFit(float(model.coef_[0]), float(model.intercept_), float(model.score(x, y)))


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> LineFit:
    """
    Fit of log y against log x; the slope is the power-law exponent.

    Args:
        x: Positive abscissae.
        y: Positive values.

    Returns:
        LineFit in log-log coordinates.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidInputError("log-log fits need positive data")
    fit = linear_fit(np.log(x), np.log(y))
    logger.debug(f"log-log fit: slope {fit.slope:.4f}, r2 {fit.r2:.4f}")
    return fit

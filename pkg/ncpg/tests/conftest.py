import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from config.settings import RunConfig
from models.araki_wyss import build_model
from stochastic.gbm import GBMSpec, build_gbm


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: refinement studies and full-suite runs")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="module")
def model2():
    """Two modes with distinct ρ, dimension 4."""
    return build_model([0.5, 0.35])


@pytest.fixture(scope="module")
def model3():
    return build_model([0.5, 0.42, 0.3])


@pytest.fixture(scope="module")
def gbm_plain():
    """h_dim 2, two cells, no reserved modes."""
    return build_gbm(GBMSpec(mu=0.5, n_t=2, T=1.0, h_dim=2, n_reserved=0))


@pytest.fixture(scope="module")
def gbm_reserved():
    """h_dim 2, two cells, one reserved Θ-pair."""
    return build_gbm(GBMSpec(mu=0.5, n_t=2, T=1.0, h_dim=2, n_reserved=2))


@pytest.fixture
def small_config(tmp_path):
    config = RunConfig(out_dir=str(tmp_path / "out"))
    config.scan = {"theta": "0.1", "cutoffs": "4, 8, 16"}
    return config

import os
import sys

# Allow running the tests from the repo root without installing anything.
_PKG_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if _PKG_ROOT not in sys.path:
    sys.path.insert(0, _PKG_ROOT)

import pytest

from models import AnomalyModel, Gaussian1D


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long Monte Carlo tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def normal(mean, variance):
    return Gaussian1D(mean=mean, variance=variance)


@pytest.fixture
def example1_model():
    """n=2, k=1, equal variance mean shift."""
    return AnomalyModel(n=2, k=1, common=normal(0.0, 1.0), anomalous=normal(1.0, 1.0))


@pytest.fixture
def example4_model():
    """n=7, k=1, one huge-variance anomaly among unit variances."""
    return AnomalyModel(n=7, k=1, common=normal(0.0, 1.0), anomalous=normal(0.0, 1e6))


@pytest.fixture
def fig1_model():
    return AnomalyModel(n=100, k=1, common=normal(0.0, 1.0), anomalous=normal(0.0, 100.0))


@pytest.fixture
def fig2_model():
    return AnomalyModel(n=102, k=1, common=normal(8.0, 1.0), anomalous=normal(0.0, 1.0))


@pytest.fixture
def small_model():
    """n=4, k=2, mean and variance both differ."""
    return AnomalyModel(n=4, k=2, common=normal(0.0, 1.0), anomalous=normal(1.5, 2.5))

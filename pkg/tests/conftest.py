import numpy as np
import pytest

from abmcalib.surrogate import TrainingSet


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow acceptance tests"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long running acceptance experiment")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture()
def toy_rows():
    rng = np.random.default_rng(3)
    X = rng.random((60, 2))
    positive = X[:, 0] + X[:, 1] > 1.0
    return TrainingSet(X, positive)


@pytest.fixture()
def xor_rows():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    return TrainingSet(X, [False, True, True, False])

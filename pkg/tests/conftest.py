import warnings

import numpy as np
import pytest

from ranksim.data import make_rank_clusters


@pytest.fixture
def clusters():
    """Small, well separated rank-cluster dataset (4 classes, 12 features)."""
    return make_rank_clusters(4, 30, 12, 0.5, seed=1)


@pytest.fixture
def int_data():
    rng = np.random.default_rng(5)
    return rng.integers(0, 20, size=(60, 10)).astype(np.float64)


@pytest.fixture(autouse=True)
def _quiet_small_feature_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="only .* features")
        yield


def pytest_terminal_summary(terminalreporter):
    from tests.test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from cirboost.data import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_regression(rng):
    n = 60
    X = np.column_stack([rng.uniform(0, 1, n), rng.integers(0, 4, n), rng.normal(size=n)])
    y = np.where(X[:, 0] > 0.5, 1.0, 0.0) + 0.3 * X[:, 1] + rng.normal(0, 0.5, n)
    return Dataset(X, y)


@pytest.fixture
def case1_data():
    rng = np.random.default_rng(7)
    x = rng.uniform(0, 4, 1000)
    return Dataset(x[:, None], rng.normal(x, 1.0))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

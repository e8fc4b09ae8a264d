import numpy as np
import pytest

from coupling_lab.metric_measure import DiscreteMeasure, euclidean_space, validate_space


def random_space(rng, size, dim=2):
    return euclidean_space(rng.random((size, dim)))


def random_measure(rng, space, zero_prob=0.0):
    w = rng.dirichlet(np.ones(space.size))
    if zero_prob:
        keep = rng.random(space.size) >= zero_prob
        keep[rng.integers(space.size)] = True
        w = np.where(keep, w, 0.0)
        w /= w.sum()
    return DiscreteMeasure(space, w)


@pytest.fixture
def line2():
    return validate_space([[0, 1], [1, 0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from ripplewalk.graph import SplitMasks, graph_from_edges

ACCEPTANCE_RESULTS = {}


def make_graph(n, edges, num_classes=2, features=None, labels=None, splits=None):
    if features is None:
        features = np.eye(n, max(n, 1))
    if labels is None:
        labels = np.arange(n) % num_classes
    return graph_from_edges(n, edges, features, labels, num_classes, splits)


@pytest.fixture
def path4():
    return make_graph(4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def star5():
    # hub 0 with four leaves
    return make_graph(5, [(0, k) for k in range(1, 5)])


@pytest.fixture
def k5():
    return make_graph(5, [(i, j) for i in range(5) for j in range(i + 1, 5)])


@pytest.fixture
def tiny_split():
    return SplitMasks([0, 1], [2], [3])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0])):
        status, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{status} criterion {key}: {detail}")

import numpy as np
import pytest

from qmfield.amplitudes import build_family, family_from_tables
from qmfield.graph_topology import GraphWindow, build_tessellation
from qmfield.operator_algebra import ProductState, SiteModel

PENTAGON = [("r", "a"), ("r", "b"), ("a", "c"), ("b", "d"), ("c", "d")]


def make_family(window, spec, state=None, dims=None):
    t = build_tessellation(window)
    sites = SiteModel(window, dims=dims)
    return build_family(t, spec, sites, state if state is not None else ProductState())


def identity_family(window):
    t = build_tessellation(window)
    return family_from_tables(t, SiteModel(window), ProductState(), "custom",
                              lambda y, x, dx, dy: np.eye(dx * dy))


def diagonal_state(window, rng):
    """Random diagonal qubit densities on every window vertex."""
    densities = {}
    for i, _ in enumerate(window.vertices):
        p = rng.uniform(0.2, 0.8)
        densities[i] = np.diag([p, 1 - p])
    return ProductState(densities)


@pytest.fixture(scope="session")
def line():
    return GraphWindow.lattice(1, 12)


@pytest.fixture(scope="session")
def z2():
    return GraphWindow.lattice(2, 5)


@pytest.fixture(scope="session")
def tree():
    return GraphWindow.tree(3, 4)


@pytest.fixture(scope="session")
def ising_line(line):
    return make_family(line, {"mode": "ising", "J": 0.7, "h": 0.2})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    acc = sys.modules.get("test_acceptance")
    if acc is not None and acc.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acc.RESULTS:
            terminalreporter.write_line(line)

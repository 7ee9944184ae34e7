import numpy as np
import pytest

from kinsplit.basis import PropertyPParams, preset
from kinsplit.dual_field import DualField, XGrid
from kinsplit.entropy import EntropyParams
from kinsplit.scheme import Problem, SchemeConfig, run
from kinsplit.vquad import build_quadrature

GUARD = PropertyPParams(1.2, 1.05, 0.5, 0.7)
LBAR = np.array([-1.0, 0.0, 1.0])


def canonical_problem(N=64, panels=16, nodes=6):
    basis = preset("1d-k3")
    quad = build_quadrature(1, 1.5 * 1.2, panels, nodes)
    return Problem(EntropyParams(9 / 8, 8.0), basis, XGrid(1, 1.0, N), quad, LBAR)


def canonical_l0(problem, amplitude=0.01):
    x = problem.grid.axis
    return DualField(problem.grid, problem.basis,
                     np.stack([-1 + amplitude * np.sin(2 * np.pi * x), 0 * x, 1 + 0 * x]))


@pytest.fixture(scope="session")
def problem():
    return canonical_problem()


@pytest.fixture(scope="session")
def l0(problem):
    return canonical_l0(problem)


@pytest.fixture(scope="session")
def acceptance_runs(problem, l0):
    """Canonical runs with ledgers, keyed by h."""
    return {h: run(SchemeConfig(h=h, T=0.2, guard=GUARD), l0, problem) for h in (0.01, 0.005)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])

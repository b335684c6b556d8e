import numpy as np
import pytest

from otgames import games
from otgames.graph import build_graph, complete_graph


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def triangle():
    return complete_graph(3)


@pytest.fixture
def path3():
    return build_graph(3, [(1, 2), (2, 3)])


@pytest.fixture
def stag():
    return games.stag_hunt()


@pytest.fixture
def rsp():
    return games.rock_scissors_paper()


@pytest.fixture
def congestion3():
    return games.congestion(3)


def random_interior(rng, n, size=None):
    return rng.dirichlet(np.ones(n), size=size)


# -- acceptance verdicts ----------------------------------------------------

_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record ``(number, title, passed, detail)`` for the acceptance summary."""
    def record(num, title, passed, detail=""):
        _VERDICTS[num] = (title, bool(passed), detail)
        line = f"criterion {num:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        print(line)
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_VERDICTS):
        title, ok, detail = _VERDICTS[num]
        terminalreporter.write_line(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")

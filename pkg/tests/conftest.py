from __future__ import annotations

import pytest

from kslayer.matching import build_construction
from kslayer.outer import ProblemParams

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def params2():
    return ProblemParams(2, 1.0)


@pytest.fixture(scope="session")
def params3():
    return ProblemParams(3, 1.0)


@pytest.fixture(scope="session")
def con2(params2):
    return build_construction(params2)


@pytest.fixture(scope="session")
def con3(params3):
    return build_construction(params3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

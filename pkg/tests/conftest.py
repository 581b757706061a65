import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from moose import fixtures  # noqa: E402


@pytest.fixture
def example():
    return fixtures.example_problem()


@pytest.fixture
def transport():
    return fixtures.domain("transport")


def pytest_terminal_summary(terminalreporter):
    from criteria import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])

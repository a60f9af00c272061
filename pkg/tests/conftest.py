import pytest

from dualauction.config import make_config
from dualauction.engine import run


@pytest.fixture(scope="session")
def dual20():
    """One default dual-auction run at size 20, shared across tests."""
    return run(make_config(mechanism="dual", n_nodes=20, seed=1))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])

import pytest

from cobrawalk import graphs

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def k3():
    return graphs.gen_complete(3)


@pytest.fixture(scope="session")
def petersen():
    return graphs.gen_petersen()


SMALL_FIXTURES = {
    "K3": lambda: graphs.gen_complete(3),
    "K4": lambda: graphs.gen_complete(4),
    "K5": lambda: graphs.gen_complete(5),
    "C5": lambda: graphs.gen_cycle(5),
    "C7": lambda: graphs.gen_cycle(7),
    "Q3": lambda: graphs.gen_hypercube(3),
}

import pytest

from minifab_bench.factory import ScenarioConfig, enumerate_scenarios


def by_variable(trace, path, variable):
    return [(r.time, r.value) for r in trace if r.path == path and r.kind == "state" and r.variable == variable]


def outputs_of(trace, path, port=None):
    return [(r.time, r.value) for r in trace if r.path == path and r.kind == "output" and (port is None or r.variable == port)]


@pytest.fixture(scope="session")
def benchmark_scenarios():
    return enumerate_scenarios()


@pytest.fixture
def small_config():
    return ScenarioConfig(12, 6, 3, "NoRepair", "Uniform", stages=2, horizon=8000, seed=7)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

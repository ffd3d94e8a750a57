import pytest

from fdedelay import BarenblattSpec, ModelParams, build_grid, derive_constants, discretize


@pytest.fixture(scope="session")
def c34():
    return derive_constants(ModelParams(1, 0.75))


@pytest.fixture(scope="session")
def c12():
    return derive_constants(ModelParams(1, 0.5))


@pytest.fixture(scope="session")
def grid4000():
    return build_grid(4000, 80.0)


@pytest.fixture(scope="session")
def b1(c34, grid4000):
    return discretize(BarenblattSpec(c34, 1.0), grid4000)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)

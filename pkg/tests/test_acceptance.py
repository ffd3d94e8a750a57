"""Acceptance criteria 1-10 on the default configuration.

Each test prints one ``[PASS]``/``[FAIL]`` line; the lines are repeated in
the terminal summary so they survive output capture.
"""
import pytest

from fdedelay.cli import Suite, load_config

VERDICTS = []


@pytest.fixture(scope="module")
def suite():
    return Suite(load_config())


@pytest.mark.parametrize("number", list(Suite.CRITERIA))
def test_criterion(suite, number):
    verdict = suite.evaluate(number)
    line = verdict.line()
    VERDICTS.append(line)
    print(line)
    assert verdict.passed, line

import math

import numpy as np
import pytest

from fdedelay.field import build_grid, dilate, integrate, lp_distance
from fdedelay.profiles import (
    BarenblattSpec, analytic_integrals, discretize, pull_back, self_similar_radius,
    to_original_variables,
)


def test_eval_examples(c12, c34):
    assert BarenblattSpec(c12, 1.0)(0.0) == pytest.approx(1.0)
    assert BarenblattSpec(c12, 4.0)(0.0) == pytest.approx(0.5)
    assert BarenblattSpec(c34, 1.0)(1.0) == pytest.approx(0.0625)


def test_eval_positive_and_shift(c34):
    spec = BarenblattSpec(c34, 2.0, 0.7)
    x = np.linspace(-50, 50, 101)
    assert np.all(spec(x) > 0)
    assert spec(0.7 + 1.3) == pytest.approx(BarenblattSpec(c34, 2.0)(1.3))


def test_analytic_integrals(c12, c34):
    assert analytic_integrals(BarenblattSpec(c34))["m_entropy"] == pytest.approx(3 * math.pi / 8)
    assert analytic_integrals(BarenblattSpec(c12))["m_entropy"] == pytest.approx(math.pi)
    assert analytic_integrals(BarenblattSpec(c12, 4.0))["second_moment"] == pytest.approx(4 * math.pi / 2)


def test_to_original_unit_radius(c12):
    spec = BarenblattSpec(c12, 1.0)
    v = to_original_variables(spec, 0.0)
    assert self_similar_radius(0.0, c12) == 1.0
    assert v.C == pytest.approx(c12.C_M * c12.mu ** (1 / c12.alpha - 2))
    assert c12.mu == pytest.approx(0.5 ** (2 / 3))
    assert c12.mu == pytest.approx(0.629961, abs=1e-6)


@pytest.mark.parametrize("tau", [0.0, 0.3, 5.0])
def test_pull_back_round_trip(c34, tau):
    spec = BarenblattSpec(c34, 1.7, 0.4)
    v = to_original_variables(spec, tau)
    back = pull_back(v, tau, c34)
    x = np.linspace(-10, 10, 100)
    np.testing.assert_allclose(back(x), spec(x), rtol=1e-12)


def test_discretize_moments(b1, c34):
    assert integrate(b1, "mass") == pytest.approx(c34.M_star, rel=1e-9)
    assert integrate(b1, "second_moment") == pytest.approx(math.pi / 16, rel=1e-7)


def test_truncated_tail_warns(c12):
    grid = build_grid(64, 5.0)
    with pytest.warns(UserWarning):
        discretize(BarenblattSpec(c12), grid, tail=False)


def test_dilation_covariance(c34, grid4000):
    for sigma, lam in [(1.0, 1.5), (2.0, 0.8)]:
        a = discretize(BarenblattSpec(c34, sigma * lam * lam), grid4000)
        b = dilate(discretize(BarenblattSpec(c34, sigma), grid4000), lam)
        assert lp_distance(a, b) < 1e-8

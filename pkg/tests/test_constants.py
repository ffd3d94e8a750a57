import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdedelay.constants import (
    ModelParams, ParameterError, asymptotic_gamma, derive_constants, spectral_gap,
)


def test_constants_d1_half():
    c = derive_constants(ModelParams(1, 0.5))
    assert c.m_c == -1.0 and c.m_1 == 0.0
    assert c.alpha == pytest.approx(2 / 3)
    assert c.C_M == pytest.approx(1.0)
    assert c.M_star == pytest.approx(math.pi / 2, rel=1e-14)
    assert c.K_M == pytest.approx(math.pi / 2, rel=1e-14)


def test_constants_d1_three_quarters():
    c = derive_constants(ModelParams(1, 0.75))
    assert c.alpha == pytest.approx(4 / 7)
    assert c.C_M == pytest.approx(1.0)
    assert c.M_star == pytest.approx(5 * math.pi / 16, rel=1e-14)
    assert c.K_M == pytest.approx(math.pi / 16, rel=1e-14)
    assert c.kappa == pytest.approx(21 / 32)
    assert c.zeta == pytest.approx(4 / (3 * math.pi), rel=1e-14)


def test_constants_d3():
    c = derive_constants(ModelParams(3, 0.8, M=2.7))
    assert c.alpha == pytest.approx(5 / 7)
    assert c.kappa == pytest.approx(0.28)
    assert c.p + c.q == pytest.approx(1.0)


def test_mass_unit_matches_quadrature():
    from scipy.integrate import quad
    for d, m in [(1, 0.6), (2, 0.8), (3, 0.9)]:
        c = derive_constants(ModelParams(d, m))
        s = c.surface
        num = quad(lambda r: s * r ** (d - 1) * (1 + r * r) ** (1 / (m - 1)), 0, np.inf, epsrel=1e-12)[0]
        assert c.M_star == pytest.approx(num, rel=1e-9)


def test_mass_changes_C_M():
    c = derive_constants(ModelParams(1, 0.75, M=2.0))
    assert c.M == 2.0
    assert c.C_M != pytest.approx(1.0)


@pytest.mark.parametrize("kwargs", [
    dict(d=3, m=1 / 3),           # m = m_c
    dict(d=3, m=0.55),            # (d+2) m <= d
    dict(d=1, m=1.2),
    dict(d=0, m=0.5),
    dict(d=1, m=0.5, D=-1.0),
    dict(d=1, m=0.5, M=0.0),
])
def test_rejects_invalid(kwargs):
    with pytest.raises(ParameterError):
        derive_constants(ModelParams(**kwargs))


def test_spectral_gap_examples():
    assert spectral_gap(3, 0.9) == 8.0
    assert spectral_gap(3, 0.75) == pytest.approx(6.125)
    assert spectral_gap(3, 7 / 9) == pytest.approx(64 / 9, abs=1e-12)
    assert spectral_gap(1, 0.75) == 8.0
    with pytest.raises(ParameterError):
        spectral_gap(3, 0.2)


def test_gamma_examples():
    assert asymptotic_gamma(3, 0.9) == pytest.approx(2 / 1.7 - 1)
    assert asymptotic_gamma(1, 0.75) == pytest.approx(1 / 7)
    assert spectral_gap(3, 2 / 3) == pytest.approx(25 / 6)
    assert asymptotic_gamma(3, 2 / 3) == pytest.approx(1 / 24)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_gap_continuous_at_breakpoints(d):
    for mb in ((d + 4) / (d + 6), (d + 1) / (d + 2)):
        lo = spectral_gap(d, mb - 1e-13)
        hi = spectral_gap(d, mb + 1e-13)
        assert abs(lo - hi) < 1e-10


@given(st.integers(1, 5), st.floats(1e-6, 1 - 1e-6))
@settings(max_examples=200, deadline=None)
def test_gamma_positive_and_gap(d, s):
    m1 = (d - 1) / d
    m = m1 + s * (1 - m1)
    if m <= m1 or m >= 1:
        return
    assert asymptotic_gamma(d, m) > 0
    if d >= 2:
        assert spectral_gap(d, m) > 4


@given(st.integers(1, 5), st.floats(0.01, 0.99))
@settings(max_examples=100, deadline=None)
def test_constant_identities(d, s):
    # finite second moment needs m > d/(d+2), which is stronger than m > m_1 only for d = 1
    m1 = max((d - 1) / d, d / (d + 2))
    m = m1 + s * (1 - m1)
    c = derive_constants(ModelParams(d, m))
    assert 0.5 < c.alpha < 1.0
    assert 0.0 < c.kappa < 1.0
    assert c.p + c.q == pytest.approx(1.0)
    assert c.p == pytest.approx(0.5 / c.alpha)
    # d int B^m = 2m/(1-m) int |x|^2 B
    from scipy.integrate import quad
    surf = c.surface
    Bm = quad(lambda r: surf * r ** (d - 1) * (1 + r * r) ** (m / (m - 1)), 0, np.inf, epsrel=1e-11)[0]
    assert Bm == pytest.approx(c.m_entropy, rel=1e-7)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_kappa_limits(d):
    m1 = (d - 1) / d
    if d > 1:
        assert abs(derive_constants(ModelParams(d, m1 + 1e-6)).kappa) < 1e-5
    assert abs(derive_constants(ModelParams(d, 1 - 1e-6)).kappa - 1) < 1e-5

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdedelay.field import (
    DensityField, GridMismatchError, build_grid, dilate, integrate, lp_distance,
    read_field_csv, write_field_csv,
)
from fdedelay.profiles import BarenblattSpec, discretize


def test_line_grid_widths():
    g = build_grid(8, 4.0)
    np.testing.assert_allclose(g.widths, 1.0)
    assert g.edges[0] == -4.0 and g.edges[-1] == 4.0


def test_radial_shell_volumes():
    g = build_grid(4, 2.0, "radial", 3)
    r = g.edges
    np.testing.assert_allclose(g.volumes, 4 * math.pi / 3 * (r[1:] ** 3 - r[:-1] ** 3), rtol=1e-14)


def test_radial_total_volume():
    g = build_grid(50, 1.0, "radial", 2)
    assert g.volumes.sum() == pytest.approx(math.pi, abs=1e-12)


def test_stretched_grid_monotone():
    g = build_grid(100, 10.0, stretch=1.03)
    assert np.all(np.diff(g.edges) > 0)
    assert g.widths[50] < g.widths[-1]


@pytest.mark.parametrize("kwargs", [
    dict(n=2, r_max=1.0), dict(n=8, r_max=-1.0), dict(n=8, r_max=1.0, stretch=1.2),
    dict(n=9, r_max=1.0),
])
def test_grid_rejects(kwargs):
    with pytest.raises(ValueError):
        build_grid(**kwargs)


def test_integrate_examples(b1):
    assert integrate(b1, "mass") == pytest.approx(5 * math.pi / 16, rel=1e-9)
    assert integrate(b1, "power_m") == pytest.approx(3 * math.pi / 8, rel=1e-7)
    assert abs(integrate(b1, "first_moment")) < 1e-14


def test_integrate_zero_field(grid4000):
    z = DensityField(grid4000, np.zeros(grid4000.n), None, 0.75)
    for kind in ("mass", "first_moment", "second_moment", "power_m"):
        assert integrate(z, kind) == 0.0
    assert integrate(z, "custom", lambda x: np.cos(x)) == 0.0


def test_integrate_linear(b1):
    twice = b1.with_values(2 * b1.values, None)
    once = b1.with_values(b1.values, None)
    assert integrate(twice, "second_moment") == pytest.approx(2 * integrate(once, "second_moment"), rel=1e-14)


def test_second_moment_refinement(c34):
    spec = BarenblattSpec(c34)
    errs = [abs(integrate(discretize(spec, build_grid(n, 20.0)), "second_moment") - c34.K_M)
            for n in (200, 400, 800)]
    assert errs[1] < errs[0] / 2 and errs[2] < errs[1] / 2


def test_dilate_laws(b1):
    assert dilate(b1, 1.0) is b1
    for lam in (0.7, 1.4):
        u = dilate(b1, lam)
        assert integrate(u, "mass") == pytest.approx(integrate(b1, "mass"), rel=1e-10)
        assert integrate(u, "second_moment") == pytest.approx(lam**2 * integrate(b1, "second_moment"), rel=1e-8)
    with pytest.raises(ValueError):
        dilate(b1, 0.0)


def test_lp_distance_examples(c34, grid4000, b1):
    assert lp_distance(b1, b1) == 0.0
    b4 = discretize(BarenblattSpec(c34, 4.0), grid4000)
    assert lp_distance(b1, b4) > 0
    assert lp_distance(b1, b4, 2) > 0
    with pytest.raises(GridMismatchError):
        lp_distance(b1, discretize(BarenblattSpec(c34), build_grid(100, 80.0)))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_lp_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(32, 3.0)
    a, b, c = (DensityField(g, rng.random(g.n)) for _ in range(3))
    for p in (1, 2):
        assert lp_distance(a, c, p) <= lp_distance(a, b, p) + lp_distance(b, c, p) + 1e-12


def test_csv_round_trip(tmp_path, b1):
    path = tmp_path / "f.csv"
    write_field_csv(b1, path)
    assert path.read_text().splitlines()[0] == "x_center,cell_volume,value"
    back = read_field_csv(path, m=0.75)
    np.testing.assert_allclose(back.grid.edges, b1.grid.edges, atol=1e-12)
    np.testing.assert_array_equal(back.values, b1.values)

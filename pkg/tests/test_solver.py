import numpy as np
import pytest

from fdedelay.field import build_grid, dilate, lp_distance
from fdedelay.functionals import barycenter
from fdedelay.profiles import BarenblattSpec, barenblatt_mixture, discretize, gaussian_bump
from fdedelay.solver import (
    COUPLED, SELF_SIMILAR, FluxOperator, SolverConfig, evolve, frame_coefficients, step,
    steady_residual,
)

GRID = build_grid(2000, 40.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(frame="lab")
    with pytest.raises(ValueError):
        SolverConfig(t_end=0.0)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, cadence=0.01)
    with pytest.raises(ValueError):
        SolverConfig(order=7)


def test_rejects_m_one():
    with pytest.raises(ValueError):
        FluxOperator(GRID, 1.0)


def test_dt_zero_is_identity(c34):
    u = discretize(BarenblattSpec(c34), GRID)
    assert step(u, 0.0, 1.0, 0.0) is u


def test_stationarity(c34):
    u = discretize(BarenblattSpec(c34), GRID)
    a, b = frame_coefficients(SELF_SIMILAR, c34)
    assert steady_residual(u, a, b) <= 1e-4 * c34.M
    traj = evolve(u, SolverConfig(t_end=1.0, cadence=0.5), c34)
    assert lp_distance(traj.final, u) <= 1e-4
    # matching sigma in the coupled frame
    v = discretize(BarenblattSpec(c34, 2.5), GRID)
    a, b = frame_coefficients(COUPLED, c34, 2.5)
    assert steady_residual(v, a, b) <= 1e-4 * c34.M
    assert steady_residual(v, *frame_coefficients(SELF_SIMILAR, c34)) > 1e-3


def test_single_steps_conserve_mass(c34):
    u = barenblatt_mixture(c34, GRID, [-0.5, 0.5])
    a, b = frame_coefficients(SELF_SIMILAR, c34)
    v = step(u, 1e-3, a, b)
    w = step(v, 1e-3, a, b, previous=u)
    m0 = float(np.sum(u.values * GRID.volumes))
    for s in (v, w):
        assert abs(float(np.sum(s.values * GRID.volumes)) - m0) <= 1e-12 * m0
        assert np.all(s.values > 0)


@pytest.fixture(scope="module")
def shifted_traj(c34):
    u = discretize(BarenblattSpec(c34, 1.0, 0.5), GRID)
    return evolve(u, SolverConfig(t_end=2.0, cadence=0.05), c34)


def test_sharp_rate(shifted_traj):
    t = shifted_traj.column("t")
    f = shifted_traj.column("f")
    sel = (t >= 0.5) & (t <= 1.5)
    slope = np.polyfit(t[sel], np.log(f[sel]), 1)[0]
    assert slope == pytest.approx(-4.0, rel=0.05)


def test_conservation_and_positivity(shifted_traj, c34):
    mass = shifted_traj.column("mass")
    assert np.max(np.abs(mass - mass[0])) <= 1e-10 * mass[0]
    assert all(np.all(u.values > 0) for u in shifted_traj.fields)
    assert np.all(np.diff(shifted_traj.times) > 0)
    f = shifted_traj.column("f")
    assert np.all(np.diff(f) <= 1e-8)


def test_first_moment_conserved_for_centred_data(c34):
    u = barenblatt_mixture(c34, GRID, [-0.3, 0.6], weights=[0.5, 0.5])
    traj = evolve(u, SolverConfig(t_end=0.5, cadence=0.1), c34)
    # the barycentre relaxes like exp(-2t) in this frame; the centred moment is conserved
    x0 = barycenter(u)
    m1 = traj.column("moment1") / traj.column("mass")
    t = traj.column("t")
    np.testing.assert_allclose(m1, x0 * np.exp(-2 * t), atol=1e-8 * 40.0)
    v = barenblatt_mixture(c34, GRID, [-0.5, 0.5])
    traj = evolve(v, SolverConfig(t_end=0.5, cadence=0.1), c34)
    assert np.max(np.abs(traj.column("moment1"))) <= 1e-8 * c34.M * 40.0


def test_coupled_frame_barenblatt(c34):
    u = discretize(BarenblattSpec(c34), GRID)
    traj = evolve(u, SolverConfig(frame=COUPLED, t_end=1.0, cadence=0.1), c34)
    sigma = traj.column("sigma")
    assert np.max(np.abs(sigma / sigma[0] - 1)) <= 1e-6
    assert np.max(np.abs(traj.column("f"))) <= 1e-8


def test_bump_entropy_decreases(c34):
    u = gaussian_bump(c34, GRID, 0.2, width=1.2)
    traj = evolve(u, SolverConfig(t_end=1.0, cadence=0.05), c34)
    f = traj.column("f")
    assert np.all(np.diff(f) < 0)


def test_refinement_convergence(c34):
    # same resolution ladder as the default experiment, on a smaller box
    r_max = 20.0
    cfg = SolverConfig(t_end=1.0, cadence=0.5)

    def final(n):
        g = build_grid(n, r_max)
        return evolve(barenblatt_mixture(c34, g, [-0.5, 0.5]), cfg, c34).final

    ref = final(4000)
    errs = []
    for n in (500, 1000):
        u = final(n)
        errs.append(lp_distance(u, dilate(ref, 1.0, onto=u.grid)))
    assert errs[0] / errs[1] >= 1.8

import math

import numpy as np
import pytest

from fdedelay.delay import build_series
from fdedelay.field import build_grid, integrate
from fdedelay.profiles import BarenblattSpec, barenblatt_mixture, discretize
from fdedelay.rescale import (
    FrameMapError, frameA_tau, frameA_time, frameB_diagnostics, integrate_R_ode, reconstruct_v,
    to_rescaled,
)
from fdedelay.solver import COUPLED, SolverConfig, evolve

GRID = build_grid(2000, 40.0)


def test_frameA_time_examples(c34):
    assert frameA_time(0.0, c34) == 0.0
    a = c34.alpha
    assert frameA_tau(a / 2, c34) == pytest.approx(4 / 7 * (math.e - 1), rel=1e-14)
    tau = np.linspace(0, 50, 100)
    np.testing.assert_allclose(frameA_tau(frameA_time(tau, c34), c34), tau, rtol=1e-12, atol=1e-14)
    with pytest.raises(ValueError):
        frameA_time(-1.0, c34)


def self_similar_moment(tau, sigma0, c):
    return sigma0 * c.K_M / c.mu**2 * (1 + c.D * tau / c.alpha) ** (2 * c.alpha)


def test_barenblatt_frames_coincide(c34):
    tau = frameA_tau(np.linspace(0, 3, 301), c34)
    fm = integrate_R_ode(tau, self_similar_moment(tau, 1.0, c34), c34)
    np.testing.assert_allclose(fm.R_B, fm.R_A, rtol=1e-8)
    np.testing.assert_allclose(fm.t_B, fm.t_A, atol=1e-8)


def test_scaled_moment_and_step_halving(c34):
    sigma0 = 4.0
    tau = frameA_tau(np.linspace(0, 3, 301), c34)
    I = self_similar_moment(tau, sigma0, c34)
    coarse = integrate_R_ode(tau, I, c34)
    fine = integrate_R_ode(tau, I, c34, substeps=2)
    assert abs(fine.R_B[-1] / coarse.R_B[-1] - 1) <= 1e-9
    # sigma_A is frozen at sigma0, so log R_B = 2 sigma0^{-p} t_A
    np.testing.assert_allclose(np.log(coarse.R_B), 2 * sigma0 ** (-c34.p) * coarse.t_A, rtol=1e-10)


def test_linear_interpolation_option(c34):
    tau = frameA_tau(np.linspace(0, 1, 11), c34)
    I = self_similar_moment(tau, 2.0, c34) * (1 + 0.1 * np.exp(-tau))
    a = integrate_R_ode(tau, I, c34, interpolation="linear", substeps=4)
    b = integrate_R_ode(tau, I, c34, interpolation="cubic", substeps=4)
    assert abs(a.R_B[-1] / b.R_B[-1] - 1) < 1e-3
    with pytest.raises(ValueError):
        integrate_R_ode(tau, I, c34, interpolation="spline")


@pytest.mark.parametrize("tau, I", [
    ([0.0], [1.0]), ([0.1, 0.2], [1.0, 1.0]), ([0.0, 0.0, 1.0], [1.0, 1.0, 1.0]), ([0.0, 1.0], [1.0, -1.0]),
])
def test_bad_series(c34, tau, I):
    with pytest.raises(FrameMapError):
        integrate_R_ode(np.array(tau), np.array(I), c34)


@pytest.fixture(scope="module")
def perturbed_run(c34):
    u0 = barenblatt_mixture(c34, GRID, [-0.5, 0.5])
    traj = evolve(u0, SolverConfig(t_end=2.0, cadence=0.01), c34)
    return u0, traj


def test_frame_consistency(perturbed_run, c34):
    _, traj = perturbed_run
    series, fm = build_series(traj, c34)
    np.testing.assert_allclose(fm.sigma_B * fm.R_B**2, fm.sigma_A * fm.R_A**2, rtol=1e-10)
    assert fm.R_A[0] == fm.R_B[0] == 1.0
    assert np.all(np.diff(fm.R_A) > 0) and np.all(np.diff(fm.R_B) > 0)
    expected = 2 / c34.D * np.exp(2 * fm.t_B / c34.alpha) * fm.sigma_B ** (0.5 / c34.alpha)
    np.testing.assert_allclose(fm.dtau_dtB(), expected, rtol=1e-6)
    # at tau = 0 both frames agree
    assert series.f[0] == pytest.approx(traj.rows[0]["f"], rel=1e-14)
    assert series.sigma[0] == pytest.approx(traj.rows[0]["sigma"], rel=1e-14)


def test_frameB_alignment_error(perturbed_run, c34):
    _, traj = perturbed_run
    _, fm = build_series(traj, c34)
    bad = {"tau": fm.tau + 0.1, "f": fm.tau, "j": fm.tau, "r": fm.tau}
    with pytest.raises(FrameMapError):
        frameB_diagnostics(bad, fm, c34)


def test_coupled_frame_cross_check(perturbed_run, c34):
    u0, traj = perturbed_run
    series, _ = build_series(traj, c34)
    direct = evolve(u0, SolverConfig(frame=COUPLED, t_end=2.0, cadence=0.01), c34)
    tB = direct.column("t")
    fB = direct.column("f")
    f_transformed = np.interp(tB, series.t_B, series.f)
    sel = tB <= min(2.0, series.t_B[-1])
    assert np.max(np.abs(f_transformed[sel] / fB[sel] - 1)) <= 1e-2


def test_reconstruct_v(c34, b1):
    v0 = reconstruct_v(b1, 0.0, c34)
    x = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(np.interp(x, v0.grid.centers, v0.values),
                               c34.mu * np.interp(c34.mu * x, b1.grid.centers, b1.values), rtol=1e-6)
    assert integrate(v0, "mass") == pytest.approx(integrate(b1, "mass"), rel=1e-10)
    for tau in (0.0, 2.0):
        u = discretize(BarenblattSpec(c34, 1.5), b1.grid)
        v = reconstruct_v(u, tau, c34)
        R = (1 + tau / c34.alpha) ** c34.alpha
        assert integrate(v, "second_moment") == pytest.approx(R * R * 1.5 * c34.K_M / c34.mu**2, rel=1e-7)
        back = to_rescaled(v, tau, c34)
        np.testing.assert_allclose(back.grid.edges, u.grid.edges, rtol=1e-8, atol=1e-12)
        np.testing.assert_allclose(back.values, u.values, rtol=1e-8)
    with pytest.raises(ValueError):
        reconstruct_v(b1, -1.0, c34)

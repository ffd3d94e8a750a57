"""Changes of variables between the original and the two rescaled frames.

Frame A uses the fixed self-similar radius ``R_A = (1 + D tau / alpha)^alpha``.
Frame B uses the moment-driven radius solving
``(1/R) dR/ds = (mu^2 I(s) / K_M)^{-p}``, ``R(0) = 1`` with ``s = D tau``.
Both frames map ``v(tau, x)`` to ``u(t, x) = (R/mu)^d v(tau, R x / mu)`` with
``t = log(R) / 2``; they differ only by a dilation, so frame-B diagnostics are
obtained from frame-A ones through exact scaling laws.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .constants import ConstantSet
from .field import DensityField, dilate

FRAMEMAP_HEADER = ["tau", "R_A", "R_B", "t_A", "t_B", "sigma_A", "sigma_B"]


class FrameMapError(ValueError):
    pass


def frameA_time(tau, constants: ConstantSet):
    """``t_A = (alpha/2) log(1 + D tau / alpha)``."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be nonnegative")
    a = constants.alpha
    out = 0.5 * a * np.log1p(constants.D * tau / a)
    return float(out) if out.ndim == 0 else out


def frameA_tau(t, constants: ConstantSet):
    """Inverse of :func:`frameA_time`."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("frame time must be nonnegative")
    a = constants.alpha
    out = a / constants.D * np.expm1(2.0 * t / a)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FrameMap:
    tau: np.ndarray
    R_A: np.ndarray
    R_B: np.ndarray
    t_A: np.ndarray
    t_B: np.ndarray
    sigma_A: np.ndarray
    sigma_B: np.ndarray
    D: float = 1.0
    alpha: float = 1.0

    @property
    def lam(self) -> np.ndarray:
        """Dilation factor ``R_A / R_B`` carrying frame A onto frame B."""
        return self.R_A / self.R_B

    def dtau_dtB(self) -> np.ndarray:
        """``dtau/dt_B`` by the chain rule through frame A."""
        dtau_dtA = 2.0 / self.D * np.exp(2.0 * self.t_A / self.alpha)
        p = 0.5 / self.alpha
        return dtau_dtA * self.sigma_A**p

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(FRAMEMAP_HEADER)
            cols = [self.tau, self.R_A, self.R_B, self.t_A, self.t_B, self.sigma_A, self.sigma_B]
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])


def integrate_R_ode(tau, I, constants: ConstantSet, substeps: int = 1,
                    interpolation: str = "cubic") -> FrameMap:
    """Integrate the moment-driven radius on the nodes ``tau`` of a moment series.

    The ODE is rewritten in frame-A time, where it reads
    ``d log R_B / dt_A = 2 sigma_A^{-p}`` with ``sigma_A = mu^2 I / (K_M R_A^2)``.
    ``sigma_A`` is interpolated in ``t_A`` (cubic spline or piecewise linear)
    and each interval is crossed with ``substeps`` classical Runge-Kutta steps.
    Self-similar data give a constant ``sigma_A``, which both interpolants
    reproduce exactly.
    """
    tau = np.asarray(tau, dtype=float)
    I = np.asarray(I, dtype=float)
    if tau.shape != I.shape or tau.ndim != 1 or tau.size < 2:
        raise FrameMapError("tau and I must be matching 1-d series with at least two nodes")
    if tau[0] != 0.0 or np.any(np.diff(tau) <= 0):
        raise FrameMapError("tau nodes must start at 0 and increase strictly")
    if np.any(I <= 0) or not np.all(np.isfinite(I)):
        raise FrameMapError("moment series must be positive and finite")
    c = constants
    p = c.p
    t_A = frameA_time(tau, c)
    R_A = np.exp(2.0 * t_A)
    sigma_A = c.mu**2 * I / (c.K_M * R_A**2)

    if interpolation == "cubic" and tau.size >= 4:
        spline = CubicSpline(t_A, sigma_A)

        def rhs(t, k):
            return 2.0 * float(spline(t)) ** (-p)
    elif interpolation in ("cubic", "linear"):
        def rhs(t, k):
            h = t_A[k + 1] - t_A[k]
            w = (t - t_A[k]) / h
            s = (1.0 - w) * sigma_A[k] + w * sigma_A[k + 1]
            return 2.0 * s ** (-p)
    else:
        raise ValueError(f"unknown interpolation {interpolation!r}")

    logR = np.zeros_like(tau)
    for k in range(tau.size - 1):
        h = (t_A[k + 1] - t_A[k]) / substeps
        y = logR[k]
        t = t_A[k]
        for _ in range(substeps):
            k1 = rhs(t, k)
            k2 = rhs(t + 0.5 * h, k)
            k4 = rhs(t + h, k)
            # the right-hand side does not depend on y, so k3 = k2
            y += h * (k1 + 4.0 * k2 + k4) / 6.0
            t += h
        logR[k + 1] = y
    R_B = np.exp(logR)
    if np.any(np.diff(R_B) <= 0):
        raise FrameMapError("moment-driven radius is not increasing")
    sigma_B = sigma_A * (R_A / R_B) ** 2
    return FrameMap(
        tau=tau, R_A=R_A, R_B=R_B, t_A=t_A, t_B=0.5 * logR,
        sigma_A=sigma_A, sigma_B=sigma_B, D=c.D, alpha=c.alpha,
    )


def frameB_diagnostics(series: dict, fmap: FrameMap, constants: ConstantSet, atol: float = 1e-9) -> dict:
    """Convert frame-A diagnostics into frame-B ones on the same tau nodes.

    ``series`` holds arrays ``tau, sigma, f, j, r`` (and optionally ``mass,
    moment1, moment2``) computed against the moment-matched profile in frame A.
    Entropy, Fisher information and remainder all scale like
    ``lam^{d(1-m)}`` under ``u -> lam^{-d} u(x/lam)``.
    """
    tau = np.asarray(series["tau"], dtype=float)
    if tau.shape != fmap.tau.shape or np.max(np.abs(tau - fmap.tau)) > atol * max(1.0, tau[-1]):
        raise FrameMapError("series and frame map are not aligned on the same tau nodes")
    lam = fmap.lam
    g = lam ** (constants.d * (1.0 - constants.m))
    out = {
        "t_A": fmap.t_A,
        "tau": fmap.tau,
        "t_B": fmap.t_B,
        "R_A": fmap.R_A,
        "R_B": fmap.R_B,
        "sigma": fmap.sigma_B,
    }
    for key in ("f", "j", "r"):
        out[key] = g * np.asarray(series[key], dtype=float)
    if "mass" in series:
        out["mass"] = np.asarray(series["mass"], dtype=float)
    if "moment1" in series:
        out["moment1"] = lam * np.asarray(series["moment1"], dtype=float)
    if "moment2" in series:
        out["moment2"] = lam**2 * np.asarray(series["moment2"], dtype=float)
    return out


def reconstruct_v(u: DensityField, tau: float, constants: ConstantSet, radius: float | None = None,
                  onto=None) -> DensityField:
    """Original-variable density ``v(x) = (mu/R)^d u(mu x / R)``.

    Without ``onto`` the grid itself is stretched by ``R/mu`` (no resampling,
    mass preserved exactly); otherwise the density is resampled on ``onto``.
    ``radius`` defaults to the frame-A radius at ``tau``.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    R = (1.0 + constants.D * tau / constants.alpha) ** constants.alpha if radius is None else radius
    lam = R / constants.mu
    if onto is not None:
        return dilate(u, lam, onto)
    d = u.grid.d
    tail = u.tail.dilated(lam, d) if u.tail is not None else None
    return DensityField(u.grid.scaled(lam), u.values * lam ** (-d), tail, u.m)


def to_rescaled(v: DensityField, tau: float, constants: ConstantSet, radius: float | None = None,
                onto=None) -> DensityField:
    """Inverse of :func:`reconstruct_v`."""
    R = (1.0 + constants.D * tau / constants.alpha) ** constants.alpha if radius is None else radius
    return reconstruct_v(v, 0.0, constants, radius=constants.mu**2 / R, onto=onto)

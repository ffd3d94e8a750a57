"""The Barenblatt family in rescaled and original variables."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import ConstantSet
from .field import LINE, DensityField, Grid, TailModel, integrate


@dataclass(frozen=True)
class BarenblattSpec:
    """``B_sigma(x - y) = sigma^{-d/2} (C_M + |x - y|^2 / sigma)^{1/(m-1)}``."""

    constants: ConstantSet
    sigma: float = 1.0
    center: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"scale sigma must be positive, got {self.sigma}")

    @property
    def m(self) -> float:
        return self.constants.m

    def potential(self, x):
        """B_sigma^{m-1}, evaluated in closed form."""
        c = self.constants
        x = np.asarray(x, dtype=float)
        return self.sigma ** c.q * (c.C_M + (x - self.center) ** 2 / self.sigma)

    def potential_gradient(self, x):
        c = self.constants
        x = np.asarray(x, dtype=float)
        return self.sigma ** (c.q - 1.0) * 2.0 * (x - self.center)

    def __call__(self, x):
        return self.potential(x) ** (1.0 / (self.m - 1.0))

    eval = __call__

    def tail_model(self) -> TailModel:
        c = self.constants
        e = 1.0 / (c.m - 1.0)
        return TailModel(
            coef=self.sigma ** (-0.5 * c.d - e),
            exponent=e,
            shift=self.sigma * c.C_M,
            center=self.center,
        )


def analytic_integrals(spec: BarenblattSpec) -> dict[str, float]:
    c = spec.constants
    return {
        "mass": c.M,
        "second_moment": spec.sigma * c.K_M + spec.center**2 * c.M,
        "m_entropy": spec.sigma ** c.q * c.m_entropy,
    }


@dataclass(frozen=True)
class OriginalBarenblatt:
    """``v_{C,y,lam}(x) = lam^{-d/2} (C + (1-m)/(2m) |x-y|^2 / lam)^{1/(m-1)}``."""

    C: float
    y: float
    lam: float
    m: float
    d: int

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = (1.0 - self.m) / (2.0 * self.m)
        return self.lam ** (-0.5 * self.d) * (self.C + k * (x - self.y) ** 2 / self.lam) ** (
            1.0 / (self.m - 1.0)
        )


def self_similar_radius(tau: float, constants: ConstantSet) -> float:
    """R(D tau + alpha) = (1 + D tau / alpha)^alpha."""
    a = constants.alpha
    return (1.0 + constants.D * tau / a) ** a


def to_original_variables(spec: BarenblattSpec, tau: float, radius: float | None = None) -> OriginalBarenblatt:
    """Original-frame Barenblatt whose rescaling at time ``tau`` is ``spec``.

    The rescaling radius defaults to the fixed self-similar one; pass
    ``radius`` to use another frame.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    c = spec.constants
    R = self_similar_radius(tau, c) if radius is None else radius
    return OriginalBarenblatt(
        C=c.C_M * c.mu ** (1.0 / c.alpha - 2.0),
        y=R * spec.center / c.mu,
        lam=R * R * spec.sigma,
        m=c.m,
        d=c.d,
    )


def pull_back(v: OriginalBarenblatt, tau: float, constants: ConstantSet, radius: float | None = None):
    """Return ``x -> (R/mu)^d v(R x / mu)``, the rescaled view of ``v``."""
    R = self_similar_radius(tau, constants) if radius is None else radius
    mu = constants.mu
    d = constants.d
    return lambda x: (R / mu) ** d * v(R * np.asarray(x, dtype=float) / mu)


def discretize(spec: BarenblattSpec, grid: Grid, tail: bool = True) -> DensityField:
    """Sample the profile at cell centres and attach its exact tail."""
    c = spec.constants
    if grid.geometry != LINE and spec.center != 0.0:
        raise ValueError("off-centre profiles need full-line geometry")
    if grid.d != c.d:
        raise ValueError(f"grid dimension {grid.d} does not match d={c.d}")
    fld = DensityField(grid, spec(grid.centers), spec.tail_model() if tail else None, c.m)
    if not tail:
        exact = analytic_integrals(spec)["second_moment"]
        got = integrate(fld, "second_moment")
        if abs(got - exact) > 1e-6 * exact:
            warnings.warn(
                f"truncated second moment off by {abs(got - exact) / exact:.2e} (relative)",
                stacklevel=2,
            )
    return fld


def barenblatt_mixture(constants: ConstantSet, grid: Grid, centers, sigma: float = 1.0,
                       weights=None) -> DensityField:
    """Convex combination of shifted Barenblatt profiles (total mass M)."""
    centers = list(centers)
    w = np.full(len(centers), 1.0 / len(centers)) if weights is None else np.asarray(weights, float)
    w = w / w.sum()
    values = np.zeros(grid.n)
    for wi, y in zip(w, centers):
        values += wi * BarenblattSpec(constants, sigma, y)(grid.centers)
    fld = DensityField(grid, values, None, constants.m).with_fitted_tail()
    # renormalise to the exact mass
    return fld.with_values(fld.values * constants.M / integrate(fld, "mass"), fld.tail)


def gaussian_bump(constants: ConstantSet, grid: Grid, amplitude: float, width: float = 0.5) -> DensityField:
    """``(1 - a) B_1 + a G`` with a Gaussian ``G`` of mass M and standard deviation ``width``."""
    if not 0.0 <= amplitude < 1.0:
        raise ValueError("perturbation amplitude must lie in [0, 1)")
    d = constants.d
    r2 = grid.centers**2
    g = constants.M * np.exp(-r2 / (2 * width**2)) / (2 * math.pi * width**2) ** (d / 2)
    b = BarenblattSpec(constants, 1.0)
    values = (1.0 - amplitude) * b(grid.centers) + amplitude * g
    tail = b.tail_model()
    tail = TailModel(tail.coef * (1.0 - amplitude), tail.exponent, tail.shift, tail.center)
    fld = DensityField(grid, values, tail, constants.m)
    return fld.with_values(fld.values * constants.M / integrate(fld, "mass"), tail)

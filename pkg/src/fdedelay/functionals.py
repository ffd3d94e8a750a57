"""Relative entropy, Fisher information, moments and best matching.

All functionals compare a discrete density with an exact Barenblatt profile
whose powers are evaluated in closed form at the cell centres.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .constants import ConstantSet
from .field import LINE, RADIAL, DensityField, gradient, integrate, integrate_pointwise
from .profiles import BarenblattSpec, analytic_integrals


class MassMismatchError(ValueError):
    pass


class NonUnimodalError(RuntimeError):
    pass


def bregman_density(u, b, m):
    """Pointwise ``[u^m - b^m - m b^{m-1}(u - b)] / (m - 1)``, stable as u -> b."""
    u = np.asarray(u, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(b <= 0):
        # far-tail profile values that underflowed: the density reduces to u^m/(m-1)
        u, b = np.broadcast_arrays(u, b)
        out = u**m / (m - 1.0)
        ok = b > 0
        out[ok] = bregman_density(u[ok], b[ok], m)
        return out
    t = u / b - 1.0
    # (1 + t)^m - 1 - m t, with the cancellation near t = 0 handled by expm1/log1p
    small = np.abs(t) < 1e-3
    phi = np.empty_like(t)
    tl = t[~small]
    with np.errstate(divide="ignore"):
        # u = 0 gives log1p(-1) = -inf and the exact limit phi = m - 1
        phi[~small] = np.expm1(m * np.log1p(tl)) - m * tl
    ts = t[small]
    # Taylor series to fourth order; next term is O(t^5) < 1e-15 relative
    c2 = m * (m - 1) / 2
    c3 = c2 * (m - 2) / 3
    c4 = c3 * (m - 3) / 4
    phi[small] = ts * ts * (c2 + ts * (c3 + ts * c4))
    return b**m * phi / (m - 1.0)


def _check_mass(u: DensityField, spec: BarenblattSpec, rtol=1e-6):
    mu = integrate(u, "mass")
    M = spec.constants.M
    if abs(mu - M) > rtol * M:
        raise MassMismatchError(f"field mass {mu!r} differs from profile mass {M!r}")


def rel_entropy(u: DensityField, spec: BarenblattSpec, check_mass: bool = True) -> float:
    if check_mass:
        _check_mass(u, spec)
    m = spec.m
    return integrate_pointwise(u, lambda v, x: bregman_density(v, spec(x), m))


def _sigma_power(spec: BarenblattSpec) -> float:
    return spec.sigma ** spec.constants.p


def rel_fisher(u: DensityField, spec: BarenblattSpec, sigma_power: bool = True) -> float:
    """``m sigma^p / (1-m) int u |grad u^{m-1} - grad B^{m-1}|^2`` on the grid."""
    _require_positive(u)
    m = spec.m
    x = u.grid.centers
    du = gradient(u.grid, u.values ** (m - 1.0))
    diff = du - spec.potential_gradient(x)
    pref = m / (1.0 - m) * (_sigma_power(spec) if sigma_power else 1.0)
    return float(pref * np.sum(u.values * diff**2 * u.grid.volumes))


def rel_moment(u: DensityField, spec: BarenblattSpec) -> float:
    return integrate(u, "second_moment") - analytic_integrals(spec)["second_moment"]


def entropy_S(u: DensityField, spec: BarenblattSpec) -> float:
    """``int (u^m - B^m)``."""
    m = spec.m
    return integrate_pointwise(u, lambda v, x: v**m - spec(x) ** m)


def decomposition_check(u: DensityField, spec: BarenblattSpec) -> float:
    """Residual of F = S/(m-1) - m sigma^{q-1} K/(m-1) for equal masses.

    With ``sigma = 1`` and ``y = 0`` this is the usual ``F = (S - m K)/(m-1)``.
    """
    c = spec.constants
    m = c.m
    F = rel_entropy(u, spec)
    S = entropy_S(u, spec)
    y = spec.center
    K = integrate(u, "custom", lambda x: (x - y) ** 2) - spec.sigma * c.K_M
    return abs(F - (S - m * spec.sigma ** (c.q - 1.0) * K) / (m - 1.0))


@dataclass(frozen=True)
class BestMatch:
    sigma: float
    center: float
    method: str
    entropy: float


def barycenter(u: DensityField) -> float:
    if u.grid.geometry == RADIAL:
        return 0.0
    return integrate(u, "first_moment") / integrate(u, "mass")


def best_sigma(u: DensityField, constants: ConstantSet, method: str = "moment",
               xtol: float = 1e-10) -> BestMatch:
    """Scale of the best-matching Barenblatt profile centred at the barycentre."""
    y = barycenter(u)
    M = integrate(u, "mass")
    m2 = integrate(u, "second_moment") - M * y * y
    s_mom = m2 / constants.K_M
    if method == "moment":
        spec = BarenblattSpec(constants, s_mom, y)
        return BestMatch(s_mom, y, "moment", rel_entropy(u, spec, check_mass=False))
    if method != "entropy-min":
        raise ValueError(f"unknown method {method!r}")

    def F(s):
        return rel_entropy(u, BarenblattSpec(constants, s, y), check_mass=False)

    for width in (10.0, 100.0):
        a, b = s_mom / width, s_mom * width
        fa, fm, fb = F(a), F(s_mom), F(b)
        if fm <= fa and fm <= fb:
            break
    else:
        raise NonUnimodalError("relative entropy is not unimodal in sigma on the bracket")
    if fm == fa or fm == fb:
        # flat at machine precision: the moment scale is already optimal
        return BestMatch(s_mom, y, "entropy-min", fm)
    res = minimize_scalar(F, bracket=(a, s_mom, b), method="golden", options={"xtol": xtol})
    return BestMatch(float(res.x), y, "entropy-min", float(res.fun))


def rayleigh_quotient(kind: str, spec: BarenblattSpec, w: Callable | None = None,
                      dw: Callable | None = None) -> float:
    """Hardy-Poincare quotient ``2(1-m) int |grad w|^2 B / int |w - wbar|^2 B^{2-m}``.

    ``kind`` is ``coordinate`` (w = x_1), ``r2`` (w = |x|^2) or ``custom``
    (a radial or one-dimensional ``w`` with derivative ``dw``).
    """
    c = spec.constants
    m, d = c.m, c.d
    B = lambda r: spec.potential(r) ** (1.0 / (m - 1.0))
    if d == 1:
        jac = lambda r: 1.0
    else:
        s = c.surface
        jac = lambda r: s * r ** (d - 1)

    def integral(f):
        if d == 1:
            # split at the origin so quad resolves the bulk
            return sum(quad(lambda r: f(r) * jac(r), a, b, limit=400, epsabs=0, epsrel=1e-11)[0]
                       for a, b in ((-np.inf, -20), (-20, 0), (0, 20), (20, np.inf)))
        return sum(quad(lambda r: f(r) * jac(r), a, b, limit=400, epsabs=0, epsrel=1e-11)[0]
                   for a, b in ((0, 20), (20, np.inf)))

    if kind == "coordinate":
        num = 2 * (1 - m) * integral(B)
        den = integral(lambda r: r * r * B(r) ** (2 - m)) / d
    else:
        if kind == "r2":
            w, dw = (lambda r: r * r), (lambda r: 2 * r)
        elif kind != "custom" or w is None or dw is None:
            raise ValueError("custom quotient needs w and its derivative dw")
        weight = lambda r: B(r) ** (2 - m)
        wbar = integral(lambda r: w(r) * weight(r)) / integral(weight)
        num = 2 * (1 - m) * integral(lambda r: dw(r) ** 2 * B(r))
        den = integral(lambda r: (w(r) - wbar) ** 2 * weight(r))
    if den <= 0:
        raise ZeroDivisionError("test function is constant in the weighted space")
    return num / den


def _require_positive(u: DensityField):
    if np.any(u.values <= 0):
        raise ValueError("functional needs a strictly positive density")


def remainder_r(u: DensityField, constants: ConstantSet, sigma: float) -> float:
    """Remainder term ``2 int u^m [|grad z|^2 - (1-m)(div z)^2]``.

    ``z = sigma^p grad u^{m-1} - 2x``.  With this normalisation the
    frozen-sigma Fisher information obeys ``J' + 4 J = -r`` and ``r`` scales
    like ``J`` under dilations.
    """
    _require_positive(u)
    m, d = constants.m, constants.d
    grid = u.grid
    x = grid.centers
    zeta = sigma**constants.p * gradient(grid, u.values ** (m - 1.0)) - 2.0 * x
    dz = gradient_odd(grid, zeta)
    if grid.geometry == LINE or d == 1:
        integrand = m * dz**2
    else:
        r = x
        integrand = dz**2 + (d - 1) * (zeta / r) ** 2 - (1 - m) * (dz + (d - 1) * zeta / r) ** 2
    return 2.0 * float(np.sum(u.values**m * integrand * grid.volumes))


def gradient_odd(grid, values):
    """Derivative of a field that is odd under reflection (a radial vector component)."""
    return gradient(grid, values, parity=-1)


def ibp_identity_check(u: DensityField) -> tuple[float, float]:
    """Discrete check of ``int |x|^2 div(u grad u^{m-1}) = -2d (1-m)/m int u^m``.

    The left side uses ``u grad u^{m-1} = (m-1)/m grad u^m`` differenced at the
    interior faces (the conservative flux form) summed against ``grad |x|^2``
    over the dual cells; the region beyond the outermost centres is
    integrated from the tail model.  Returns ``(residual, rhs)``.
    """
    m = u.m
    if m is None:
        raise ValueError("field exponent m is required")
    grid = u.grid
    d = grid.d
    c = (m - 1.0) / m
    x = grid.centers
    um = u.values**m
    xf = grid.edges[1:-1]
    dx = np.diff(x)
    flux = c * np.diff(um) / dx
    # -int grad|x|^2 . F over dual cells [x_i, x_{i+1}] (times face area)
    lhs = -float(np.sum(2.0 * xf * flux * grid.face_areas * dx))
    if u.tail is not None:
        tail = u.tail
        r_out = abs(x[-1])
        F = lambda r: c * m * tail(r) ** (m - 1.0) * tail.derivative(r)
        if grid.geometry == LINE:
            lhs -= quad(lambda r: 2 * r * F(r), r_out, np.inf, epsabs=0, epsrel=1e-11, limit=200)[0]
            lhs -= quad(lambda r: 2 * r * F(r), -np.inf, -abs(x[0]), epsabs=0, epsrel=1e-11, limit=200)[0]
        else:
            from .constants import unit_sphere_area

            s = unit_sphere_area(d)
            lhs -= s * quad(lambda r: 2 * r * F(r) * r ** (d - 1), r_out, np.inf,
                            epsabs=0, epsrel=1e-11, limit=200)[0]
    rhs = -2.0 * d * (1.0 - m) / m * integrate(u, "power_m")
    return abs(lhs - rhs), rhs

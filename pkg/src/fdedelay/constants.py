"""Model parameters and the closed-form constants of the fast diffusion problem.

Everything here is a pure function of ``(d, m, D, M)``.  The Barenblatt mass
normalisation ``M*`` is evaluated through the Beta function, so no quadrature
error leaks into downstream functionals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.special import beta as beta_fn


class ParameterError(ValueError):
    """Raised for parameters outside the supported fast-diffusion regime."""


@dataclass(frozen=True)
class ModelParams:
    d: int
    m: float
    D: float = 1.0
    M: float | None = None  # None means M = M*, i.e. C_M = 1

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f"dimension d must be an integer >= 1, got {self.d}")
        if not 0.0 < self.m < 1.0:
            raise ParameterError(f"exponent m must lie in (0, 1), got {self.m}")
        if self.D <= 0:
            raise ParameterError(f"diffusion coefficient D must be positive, got {self.D}")
        if self.M is not None and self.M <= 0:
            raise ParameterError(f"mass M must be positive, got {self.M}")

    @property
    def m_c(self) -> float:
        return (self.d - 2) / self.d

    @property
    def m_1(self) -> float:
        return (self.d - 1) / self.d

    @property
    def in_delay_range(self) -> bool:
        return self.m_1 < self.m < 1.0


@dataclass(frozen=True)
class ConstantSet:
    d: int
    m: float
    D: float
    M: float
    m_c: float
    m_1: float
    alpha: float
    mu: float
    M_star: float
    C_M: float
    K_M: float
    kappa: float
    zeta: float
    # d(m - m_c)/2 = 1/(2 alpha): power of sigma in the rescaled diffusion
    p: float = field(init=False)
    # d(1 - m)/2: scaling exponent of the entropy under dilations
    q: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p", 0.5 * self.d * (self.m - self.m_c))
        object.__setattr__(self, "q", 0.5 * self.d * (1.0 - self.m))

    @property
    def m_entropy(self) -> float:
        """Integral of B_1^m."""
        return 2.0 * self.m * self.K_M / (self.d * (1.0 - self.m))

    @property
    def surface(self) -> float:
        return unit_sphere_area(self.d)


def unit_sphere_area(d: int) -> float:
    """Surface measure of S^{d-1}; equals 2 for d = 1 (the two half-lines)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def barenblatt_mass_unit(d: int, m: float) -> float:
    """M* = int (1 + |x|^2)^{1/(m-1)} dx over R^d."""
    b = 1.0 / (1.0 - m) - d / 2.0
    if b <= 0:
        raise ParameterError(f"Barenblatt profile has infinite mass for d={d}, m={m}")
    return 0.5 * unit_sphere_area(d) * beta_fn(d / 2.0, b)


def derive_constants(params: ModelParams) -> ConstantSet:
    d, m, D = params.d, params.m, params.D
    m_c = params.m_c
    m_1 = params.m_1
    if abs(m - m_c) < 1e-14:
        raise ParameterError("m = m_c: the self-similar exponent alpha is undefined")
    if (d + 2) * m <= d:
        raise ParameterError(
            f"(d+2) m <= d for d={d}, m={m}: Barenblatt second moment is infinite"
        )
    # finite second moment also guarantees 1/(1-m) > d/2 + 1 for the Beta reduction
    alpha = 1.0 / (d * (m - m_c))
    mu = ((1.0 - m) / (2.0 * m)) ** alpha
    M_star = barenblatt_mass_unit(d, m)
    M = M_star if params.M is None else float(params.M)
    C_M = (M / M_star) ** (2.0 * (m - 1.0) / (d * (m - m_c)))
    K_M = d * (1.0 - m) / ((d + 2) * m - d) * M * C_M
    kappa = 0.5 * d * d * (m - m_c) * (m - m_1)
    zeta = d * (1.0 - m) ** 2 / (m * K_M)
    return ConstantSet(
        d=d, m=m, D=D, M=M, m_c=m_c, m_1=m_1, alpha=alpha, mu=mu,
        M_star=M_star, C_M=C_M, K_M=K_M, kappa=kappa, zeta=zeta,
    )


def spectral_gap(d: int, m: float) -> float:
    """Asymptotic decay rate of the best-matching relative entropy."""
    m_c = (d - 2) / d
    if m <= m_c or m >= 1.0:
        raise ParameterError(f"spectral gap needs m_c < m < 1, got d={d}, m={m}")
    if d == 1:
        return 8.0
    if m <= (d + 4) / (d + 6):
        return (d - 4 - m * (d - 2)) ** 2 / (2.0 * (1.0 - m))
    if m <= (d + 1) / (d + 2):
        return 8.0 * (d + 2) * m - 8.0 * d
    return 8.0


def asymptotic_gamma(d: int, m: float) -> float:
    """Exponent gamma = alpha * Lambda / 4 - 1 of the improved moment estimate."""
    lam = spectral_gap(d, m)
    alpha = 1.0 / (d * (m - (d - 2) / d))
    return 0.25 * alpha * lam - 1.0

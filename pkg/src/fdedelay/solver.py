"""Finite-volume integrator for ``w_t = a(t) Lap(w^m) + b div(x w)``.

The equation is written as a continuity equation ``w_t + div(w grad Phi) = 0``
with the potential ``Phi = a m/(1-m) w^{m-1} - b |x|^2 / 2``.  On uniform
line grids the face value of ``w`` and the face derivative of ``Phi`` come
from four-point stencils, and the point-value divergence carries the
fourth-order flux correction; elsewhere (and wherever the cubic face value is
not positive) two-point averages are used.  The update is conservative
(telescoping fluxes, no-flux outer boundary) and any Barenblatt profile
sampled at cell centres is an exact discrete steady state.

Time stepping is implicit BDF4, started by fine BDF2 substeps, with Newton
iterations in ``log w``.  The tail diffusivity ``a m w^{m-1}`` grows like
``|x|^2``, which would force explicit steps of order 1e-7 on default grids.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .constants import ConstantSet
from .field import DensityField, Grid, _extended, integrate, lagrange_weights
from .functionals import rel_entropy, rel_fisher, remainder_r, entropy_S
from .profiles import BarenblattSpec, analytic_integrals

log = logging.getLogger(__name__)

ORIGINAL = "original"
SELF_SIMILAR = "self-similar"
COUPLED = "best-matching-coupled"
FRAMES = (ORIGINAL, SELF_SIMILAR, COUPLED)
FACE_RULES = ("fourth", "mean", "upwind")
MIN_CELLS = 16
START_SUBSTEPS = 16


class SolverError(RuntimeError):
    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


@dataclass(frozen=True)
class SolverConfig:
    frame: str = SELF_SIMILAR
    t_end: float = 3.0
    dt: float = 1e-3
    cadence: float = 0.01
    sigma: float = 1.0  # fixed scale in the self-similar frame
    order: int = 4  # BDF order of the main steps
    newton_tol: float = 1e-11
    max_halvings: int = 20
    diagnostics: bool = True

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")
        if not self.t_end > 0:
            raise ValueError("end time must be positive")
        if not 0 < self.dt <= self.cadence:
            raise ValueError("need 0 < dt <= cadence")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.order not in BDF:
            raise ValueError("BDF order must be 1, 2, 3 or 4")


def frame_coefficients(frame: str, constants: ConstantSet, sigma: float = 1.0) -> tuple[float, float]:
    """(a, b) of ``w_t = a Lap w^m + b div(x w)`` for a frame at scale sigma."""
    m = constants.m
    if frame == ORIGINAL:
        return constants.D, 0.0
    return (1.0 - m) / m * sigma**constants.p, 2.0


class FluxOperator:
    """Discrete divergence of ``w grad Phi`` on a fixed grid.

    Each interior face carries a four-point stencil over neighbouring cells,
    with separate weights for the face value of ``w`` and for the face
    derivative of ``Phi``.  Derivative weights sum to zero, so any density
    with constant ``Phi`` is an exact steady state whatever the face rule.
    """

    def __init__(self, grid: Grid, m: float, face: str = "fourth"):
        if not 0 < m < 1:
            raise ValueError("solver supports 0 < m < 1 only")
        if grid.n < MIN_CELLS:
            raise ValueError(f"solver needs at least {MIN_CELLS} cells, got {grid.n}")
        if face not in FACE_RULES:
            raise ValueError(f"unknown face rule {face!r}")
        self.face = face
        self.grid = grid
        self.m = m
        self.x = grid.centers
        self.x2 = self.x**2
        self.vol = grid.volumes
        self.area = grid.face_areas
        self._build_stencils()

    def _build_stencils(self):
        grid = self.grid
        n = grid.n
        xe, idx = _extended(grid, 1)
        off = xe.size - n
        xf = grid.edges[1:-1]
        left = np.arange(n - 1) + off
        # two-point rule: arithmetic mean and the plain difference quotient
        cols2 = np.stack([left - 1, left, left + 1, left + 2], axis=1)
        cols2 = np.clip(cols2, 0, xe.size - 1)
        dx = xe[left + 1] - xe[left]
        self.w2 = np.zeros((n - 1, 4))
        self.w2[:, 1:3] = 0.5
        self.d2 = np.zeros((n - 1, 4))
        self.d2[:, 1] = -1.0 / dx
        self.d2[:, 2] = 1.0 / dx
        self.cols = idx[cols2]
        self.correct = False
        if self.face != "fourth":
            self.wv, self.dv = self.w2, self.d2
            self._band_layout()
            return
        ok = (left - 1 >= 0) & (left + 2 <= xe.size - 1)
        nodes = xe[cols2]
        w4 = lagrange_weights(nodes, xf)
        d4 = lagrange_weights(nodes, xf, derivative=True)
        self.wv = np.where(ok[:, None], w4, self.w2)
        self.dv = np.where(ok[:, None], d4, self.d2)
        widths = grid.widths
        # point values on a uniform line: the difference of face fluxes needs
        # the -h^2/24 F'' correction to stay fourth order
        self.correct = grid.geometry == "line" and np.allclose(widths, widths[0], rtol=1e-8, atol=0)
        self._band_layout()

    def _band_layout(self):
        """Flat positions in the (7, n) banded Jacobian of every stencil entry."""
        n = self.grid.n
        cols = self.cols
        faces = np.broadcast_to(np.arange(n - 1)[:, None], cols.shape)
        if self.correct:
            inner = np.arange(1, n - 2)[:, None]
            faces = np.concatenate([faces.ravel(), np.broadcast_to(inner, cols[:-2].shape).ravel(),
                                    np.broadcast_to(inner, cols[2:].shape).ravel()])
            jcol = np.concatenate([cols.ravel(), cols[:-2].ravel(), cols[2:].ravel()])
        else:
            faces, jcol = faces.ravel(), cols.ravel()
        plus = (3 + faces - jcol) * n + jcol
        minus = (4 + faces - jcol) * n + jcol
        self._band_index = np.concatenate([plus, minus])

    def potential(self, w, a, b):
        return a * self.m / (1.0 - self.m) * w ** (self.m - 1.0) - 0.5 * b * self.x2

    def _faces(self, w, phi):
        """Face values, face derivatives of Phi and the value weights in use."""
        ws = w[self.cols]
        dphi = np.sum(self.dv * phi[self.cols], axis=1)
        if self.face == "upwind":
            wv = np.zeros_like(self.w2)
            up = dphi > 0
            wv[up, 1] = 1.0
            wv[~up, 2] = 1.0
        else:
            wv = self.wv
            wf = np.sum(wv * ws, axis=1)
            if self.face == "fourth" and np.any(wf <= 0):
                # fall back to the mean where the cubic interpolant undershoots
                wv = np.where((wf > 0)[:, None], wv, self.w2)
        wf = np.sum(wv * ws, axis=1)
        return wf, dphi, wv

    def _corrected(self, F):
        if not self.correct:
            return F
        out = F.copy()
        out[1:-1] = (26.0 * F[1:-1] - F[:-2] - F[2:]) / 24.0
        return out

    def face_flux(self, w, a, b):
        wf, dphi, _ = self._faces(w, self.potential(w, a, b))
        return self._corrected(self.area * wf * dphi)

    def divergence(self, w, a, b):
        """Net outflow per cell (A F)_{i+1/2} - (A F)_{i-1/2}."""
        F = self.face_flux(w, a, b)
        out = np.zeros_like(w)
        out[:-1] += F
        out[1:] -= F
        return out

    def implicit_solve(self, rhs, dt_eff, a, b, w0, tol=1e-11, maxiter=40):
        """Solve ``vol (w - rhs) + dt_eff div(w) = 0`` by Newton in log w."""
        m = self.m
        n = w0.size
        s = np.log(w0)
        cphi = a * m / (1.0 - m)
        vol = self.vol
        cols = self.cols
        for it in range(maxiter):
            w = np.exp(s)
            phi = cphi * w ** (m - 1.0) - 0.5 * b * self.x2
            wf, dphi, wv = self._faces(w, phi)
            F = self._corrected(self.area * wf * dphi)
            G = vol * (w - rhs)
            G[:-1] += dt_eff * F
            G[1:] -= dt_eff * F
            # dF_f / dlog w_j for the stencil cells of each face
            psi = cphi * (m - 1.0) * w ** (m - 1.0)
            dF = self.area[:, None] * (wv * w[cols] * dphi[:, None] + wf[:, None] * self.dv * psi[cols])
            if self.correct:
                mix = np.ones(n - 1)
                mix[1:-1] = 26.0 / 24.0
                val = np.concatenate([(dF * mix[:, None]).ravel(), -dF[:-2].ravel() / 24.0,
                                      -dF[2:].ravel() / 24.0])
            else:
                val = dF.ravel()
            # face f adds +dF to row f and -dF to row f + 1 of the 7-band matrix
            ab = np.bincount(self._band_index, weights=dt_eff * np.concatenate([val, -val]),
                             minlength=7 * n).reshape(7, n)
            ab[3] += vol * w
            ds = solve_banded((3, 3), ab, -G)
            if not np.all(np.isfinite(ds)):
                return None
            step = np.max(np.abs(ds))
            if step > 2.0:
                ds *= 2.0 / step
            s = s + ds
            if step < tol:
                return np.exp(s)
        return None

    def steady_residual(self, w, a, b) -> float:
        return float(np.sum(np.abs(self.divergence(w, a, b))))


def steady_residual(u: DensityField, a: float, b: float) -> float:
    """L1 norm of the discrete right-hand side, ``sum_i |vol_i dw_i/dt|``."""
    return FluxOperator(u.grid, u.m).steady_residual(u.values, a, b)


def step(state: DensityField, dt: float, a: float, b: float, previous: DensityField | None = None,
         dt_prev: float | None = None) -> DensityField:
    """One implicit step: BDF2 when ``previous`` is given, backward Euler otherwise."""
    if dt == 0:
        return state
    if state.m is None:
        raise ValueError("field exponent m is required")
    op = FluxOperator(state.grid, state.m)
    hist = [state.values] if previous is None else [state.values, previous.values]
    w = _advance(op, hist, dt, a, b)
    if w is None:
        raise SolverError("implicit step failed")
    return state.with_values(w, state.tail)


# BDF coefficients: w_new = sum(c_k w_{n-k}) + beta dt L(w_new)
BDF = {
    1: ((1.0,), 1.0),
    2: ((4.0 / 3.0, -1.0 / 3.0), 2.0 / 3.0),
    3: ((18.0 / 11.0, -9.0 / 11.0, 2.0 / 11.0), 6.0 / 11.0),
    4: ((48.0 / 25.0, -36.0 / 25.0, 16.0 / 25.0, -3.0 / 25.0), 12.0 / 25.0),
}


def _advance(op, history, dt, a, b, tol=1e-11, order=None):
    """One BDF step of the given order from ``history`` (newest state first)."""
    k = len(history) if order is None else order
    coef, beta = BDF[k]
    rhs = sum(c * w for c, w in zip(coef, history))
    if np.any(rhs <= 0):
        return None
    # polynomial extrapolation as the Newton guess, kept positive
    ext = BDF_EXTRAP[min(k, len(history))]
    guess = np.maximum(sum(c * w for c, w in zip(ext, history)), 0.5 * history[0])
    return op.implicit_solve(rhs, beta * dt, a, b, guess, tol)


BDF_EXTRAP = {1: (1.0,), 2: (2.0, -1.0), 3: (3.0, -3.0, 1.0), 4: (4.0, -6.0, 4.0, -1.0)}


def _start(op, w, dt, coeffs, steps, tol, substeps=START_SUBSTEPS):
    """Self-starting values at ``dt, 2dt, ...`` from BDF2 on a fine substep.

    ``coeffs(history)`` returns ``(a, b)`` for the next level.  The fine steps
    keep the starting error well below the local error of the main scheme.
    """
    h = dt / substeps
    hist = [w]
    out = []
    for i in range(steps * substeps):
        a, b = coeffs(hist)
        if len(hist) == 1:
            # backward Euler on two half substeps, then BDF2
            cur = hist[0]
            for _ in range(2):
                cur = op.implicit_solve(cur, 0.5 * h, a, b, cur, tol)
                if cur is None:
                    return None
            nxt = cur
        else:
            nxt = _advance(op, hist[:2], h, a, b, tol, order=2)
            if nxt is None:
                return None
        hist = [nxt] + hist[:1]
        if (i + 1) % substeps == 0:
            out.append(nxt)
    return out


@dataclass
class Trajectory:
    frame: str
    times: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    sigma_path: list = field(default_factory=list)

    @property
    def final(self) -> DensityField:
        return self.fields[-1]

    def column(self, key):
        return np.array([r[key] for r in self.rows])


def diagnose(u: DensityField, constants: ConstantSet, frame: str, t: float) -> dict:
    """Best-matching diagnostics of one snapshot (centred profiles, sigma from the moment)."""
    mass = integrate(u, "mass")
    m1 = integrate(u, "first_moment")
    m2 = integrate(u, "second_moment")
    row = {"t": t, "mass": mass, "moment1": m1, "moment2": m2}
    if frame == ORIGINAL:
        return row
    sigma = m2 / constants.K_M
    spec = BarenblattSpec(constants, sigma)
    row["sigma"] = sigma
    row["f"] = rel_entropy(u, spec, check_mass=False)
    row["j"] = rel_fisher(u, spec)
    row["r"] = remainder_r(u, constants, sigma)
    row["int_um"] = integrate(u, "power_m")
    if frame == SELF_SIMILAR:
        b1 = BarenblattSpec(constants, 1.0)
        row["F1"] = rel_entropy(u, b1, check_mass=False)
        row["S1"] = entropy_S(u, b1)
        row["K1"] = m2 - analytic_integrals(b1)["second_moment"]
    return row


def evolve(u0: DensityField, config: SolverConfig, constants: ConstantSet) -> Trajectory:
    """Integrate from ``u0`` to ``config.t_end``, recording snapshots at the cadence.

    In the coupled frame the scale ``sigma(t) = int |x|^2 u / K_M`` is
    re-evaluated from the current moment and enters the diffusion
    coefficient; it is extrapolated polynomially to the new time level.
    """
    if u0.m is None:
        u0 = DensityField(u0.grid, u0.values, u0.tail, constants.m)
    if np.any(u0.values <= 0):
        raise ValueError("initial density must be strictly positive on the grid")
    grid = u0.grid
    op = FluxOperator(grid, constants.m)
    frame = config.frame
    tail0 = u0.tail
    # second moment carried by the tail; the grid part evolves, the tail part is frozen
    m2_tail = integrate(u0, "second_moment") - float(np.sum(op.x2 * u0.values * op.vol))

    def sigma_of(w):
        return (float(np.sum(op.x2 * w * op.vol)) + m2_tail) / constants.K_M

    def coeffs(sig):
        if frame == COUPLED:
            return frame_coefficients(frame, constants, sig)
        return frame_coefficients(frame, constants, config.sigma)

    traj = Trajectory(frame)
    n_out = int(round(config.t_end / config.cadence))
    sub = int(round(config.cadence / config.dt))
    dt = config.cadence / sub
    w = u0.values.copy()
    order = config.order
    # newest first; sigma path mirrors the state history
    hist = [w]
    sig_hist = [sigma_of(w)]

    def coeffs_for(states):
        sigs = [sigma_of(v) for v in states[:order]]
        ext = BDF_EXTRAP[len(sigs)]
        return coeffs(sum(c * s for c, s in zip(ext, sigs)))

    def record(t, w):
        fld = DensityField(grid, w, tail0, constants.m)
        fld = fld.with_fitted_tail() if tail0 is not None else fld
        traj.times.append(t)
        traj.fields.append(fld)
        traj.sigma_path.append(sigma_of(w))
        if config.diagnostics:
            traj.rows.append(diagnose(fld, constants, frame, t))

    record(0.0, w)
    pending = []  # starter values not yet consumed
    n_steps = n_out * sub
    for i in range(1, n_steps + 1):
        if len(hist) < order and not pending:
            pending = _start(op, hist[0], dt, coeffs_for, order - len(hist), config.newton_tol) or []
        if pending:
            w_next = pending.pop(0)
        else:
            ext = BDF_EXTRAP[len(sig_hist)]
            a, b = coeffs(sum(c * s for c, s in zip(ext, sig_hist)))
            w_next = _advance(op, hist, dt, a, b, config.newton_tol)
        if w_next is None:
            w_next = _halving_fallback(op, hist[0], dt, coeffs, sigma_of, config)
            hist, sig_hist, pending = [], [], []  # restart the multistep history
            if w_next is None:
                raise SolverError(f"step failed near t={i * dt}", traj)
        if not np.all(np.isfinite(w_next)):
            raise SolverError("non-finite values", traj)
        hist = ([w_next] + hist)[:order]
        sig_hist = ([sigma_of(w_next)] + sig_hist)[:order]
        if i % sub == 0:
            record(i // sub * config.cadence, w_next)
    return traj


def _halving_fallback(op, w, dt, coeffs, sigma_of, config):
    """Backward-Euler substeps with repeated halving of the step."""
    for level in range(1, config.max_halvings + 1):
        n = 2**level
        h = dt / n
        cur = w
        for _ in range(n):
            a, b = coeffs(sigma_of(cur))
            cur = op.implicit_solve(cur, h, a, b, cur, config.newton_tol)
            if cur is None:
                break
        if cur is not None:
            log.debug("step recovered after %d halvings", level)
            return cur
    return None

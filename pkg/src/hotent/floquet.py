"""Fundamental solutions of the driven normal-mode equations and Floquet analysis.

Each normal mode obeys ``x'' + g x' + Omega^2(t) x = 0``. The state vector is
``(x, x')`` and the fundamental matrix is

    Phi(t) = [[f2, f1], [f2', f1']],   Phi(0) = I,

so ``f1`` is the solution with ``f1(0)=0, f1'(0)=1`` and ``f2`` the one with
``f2(0)=1, f2'(0)=0``. The anti-damped equation (``-g``) gives ``g1, g2``.

Integration uses the 4-stage Gauss-Legendre collocation scheme (order 8). The
ODE is linear, so every step is a 2x2 matrix obtained from one 8x8 solve and
all steps of a drive period are computed in a single batched solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import SystemConfig, omega_sq
from .errors import CausticError, ConfigError, IntegrationError

WRONSKIAN_RTOL = 1e-8
MAX_REFINEMENTS = 5


def _gauss_legendre_tableau(stages: int = 4):
    x, w = np.polynomial.legendre.leggauss(stages)
    c = 0.5 * (x + 1.0)
    b = 0.5 * w
    a = np.empty((stages, stages))
    for j in range(stages):
        others = np.delete(c, j)
        basis = np.poly1d(np.poly(others)) / np.prod(c[j] - others)
        prim = np.polyint(basis)
        a[:, j] = prim(c) - prim(0.0)
    return a, b, c


_A, _B, _C = _gauss_legendre_tableau()


def _drift(config: SystemConfig, mode: str, t, damping: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (2, 2))
    out[..., 0, 1] = 1.0
    out[..., 1, 0] = -omega_sq(config, mode, t)
    out[..., 1, 1] = -damping
    return out


def gauss_legendre_steps(config: SystemConfig, mode: str, t0: np.ndarray, h: float,
                         damping: float) -> np.ndarray:
    """One-step propagators ``y(t0+h) = S y(t0)`` for an array of start times."""
    t0 = np.atleast_1d(np.asarray(t0, dtype=float))
    n = t0.size
    s = len(_C)
    mats = _drift(config, mode, t0[:, None] + _C[None, :] * h, damping)  # (n, s, 2, 2)
    z = np.zeros((n, 2 * s, 2 * s))
    for i in range(s):
        z[:, 2 * i:2 * i + 2, 2 * i:2 * i + 2] += np.eye(2)
        for j in range(s):
            z[:, 2 * i:2 * i + 2, 2 * j:2 * j + 2] -= h * _A[i, j] * mats[:, j]
    rhs = np.tile(np.eye(2), (s, 1))
    stages = np.linalg.solve(z, np.broadcast_to(rhs, (n, 2 * s, 2)))
    step = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    for i in range(s):
        step += h * _B[i] * mats[:, i] @ stages[:, 2 * i:2 * i + 2]
    return step


def _chain(mats: np.ndarray) -> np.ndarray:
    """Ordered product ``mats[-1] @ ... @ mats[0]`` along axis -3."""
    out = mats[..., 0, :, :]
    for k in range(1, mats.shape[-3]):
        out = mats[..., k, :, :] @ out
    return out


@dataclass(frozen=True)
class PeriodPropagator:
    """One-period step data for a single normal mode.

    Attributes
    ----------
    fine_steps : (n_fine, 2, 2) Gauss-Legendre step matrices over one period
    grid_steps : (grid_per_period, 2, 2) propagators between noise-grid points
    monodromy : propagator over one full drive period
    damping : damping used in the equation (negative for the anti-damped one)
    """

    config: SystemConfig
    mode: str
    damping: float
    fine_steps: np.ndarray
    grid_steps: np.ndarray
    monodromy: np.ndarray

    @property
    def n_fine(self) -> int:
        return self.fine_steps.shape[0]

    def prefix(self) -> np.ndarray:
        """Propagators ``Phi(t_j)`` for ``j = 0..n_fine`` within the first period."""
        out = np.empty((self.n_fine + 1, 2, 2))
        out[0] = np.eye(2)
        for j, s in enumerate(self.fine_steps):
            out[j + 1] = s @ out[j]
        return out


def _build_period(config: SystemConfig, mode: str, damping: float) -> PeriodPropagator:
    period = config.period
    n_fine = config.steps_per_period
    grid = config.grid_per_period
    for attempt in range(MAX_REFINEMENTS + 1):
        h = period / n_fine
        t0 = np.arange(n_fine) * h
        steps = gauss_legendre_steps(config, mode, t0, h, damping)
        if not np.all(np.isfinite(steps)):
            bad = int(np.argmax(~np.all(np.isfinite(steps), axis=(1, 2))))
            raise IntegrationError("non-finite step propagator", time=t0[bad])
        # Liouville: det of each step is exp(-damping h)
        dets = np.linalg.det(steps) * math.exp(damping * h)
        drift = np.abs(dets - 1.0) * n_fine
        if np.max(drift) <= WRONSKIAN_RTOL:
            break
        if attempt == MAX_REFINEMENTS:
            worst = int(np.argmax(drift))
            raise IntegrationError(
                f"Wronskian drift {drift[worst]:.2e} after {attempt} refinements", time=t0[worst]
            )
        n_fine *= 2
    per_grid = n_fine // grid
    grid_steps = _chain(steps.reshape(grid, per_grid, 2, 2))
    monodromy = _chain(grid_steps)
    return PeriodPropagator(config, mode, damping, steps, grid_steps, monodromy)


@lru_cache(maxsize=64)
def _period_cached(config: SystemConfig, mode: str, damping: float) -> PeriodPropagator:
    return _build_period(config, mode, damping)


def period_propagator(config: SystemConfig, mode: str, anti_damped: bool = False) -> PeriodPropagator:
    damping = -config.g if anti_damped else config.g
    # theta and cutoff do not enter the homogeneous equation
    key = config.replace(theta=0.0, cutoff=1.0)
    return _period_cached(key, mode, damping)


# -- fundamental solutions -----------------------------------------------------


@dataclass(frozen=True)
class FundamentalSolutionSet:
    """Fundamental solutions sampled on a uniform grid ``t = j * dt``."""

    mode: str
    g: float
    dt: float
    t: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    df1: np.ndarray
    df2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    dg1: np.ndarray
    dg2: np.ndarray

    def index(self, t: float) -> int:
        k = int(round(t / self.dt))
        if k < 0 or k >= self.t.size or abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ConfigError(f"t={t!r} is not a grid point of this solution set")
        return k

    def wronskian(self) -> np.ndarray:
        """``exp(g t) (f2 f1' - f1 f2')``, identically 1."""
        return np.exp(self.g * self.t) * (self.f2 * self.df1 - self.f1 * self.df2)


def _sample(prop: PeriodPropagator, n_periods: int, stride: int):
    pre = prop.prefix()[:-1]
    blocks = []
    m = np.eye(2)
    for _ in range(n_periods):
        blocks.append(pre @ m)
        m = prop.monodromy @ m
    blocks.append((pre[:1] @ m))
    phi = np.concatenate(blocks)[::stride]
    return phi


def integrate_fundamentals(config: SystemConfig, mode: str, horizon: float | None = None,
                           stride: int = 1) -> FundamentalSolutionSet:
    """Sample f1, f2 (damped) and g1, g2 (anti-damped) over ``horizon`` periods.

    ``stride`` thins the fine integration grid (``time_step * period``).
    """
    horizon = config.horizon if horizon is None else horizon
    if horizon < 1:
        raise ConfigError(f"horizon: must be at least one drive period (got {horizon})")
    n_periods = int(math.ceil(horizon - 1e-12))
    damped = period_propagator(config, mode)
    anti = period_propagator(config, mode, anti_damped=True)
    if damped.n_fine != anti.n_fine:
        n = max(damped.n_fine, anti.n_fine)
        cfg = config.replace(time_step=1.0 / n)
        damped = period_propagator(cfg, mode)
        anti = period_propagator(cfg, mode, anti_damped=True)
    phi = _sample(damped, n_periods, stride)
    psi = _sample(anti, n_periods, stride)
    dt = config.period / damped.n_fine * stride
    t = np.arange(phi.shape[0]) * dt
    return FundamentalSolutionSet(
        mode=mode, g=config.g, dt=dt, t=t,
        f1=phi[:, 0, 1], f2=phi[:, 0, 0], df1=phi[:, 1, 1], df2=phi[:, 1, 0],
        g1=psi[:, 0, 1], g2=psi[:, 0, 0], dg1=psi[:, 1, 1], dg2=psi[:, 1, 0],
    )


# -- boundary-value solutions --------------------------------------------------


@dataclass(frozen=True)
class BoundarySolutions:
    """Two-point boundary solutions on ``s in [0, t_final]``.

    ``u1, u2`` solve the damped equation with ``u1(0)=1, u1(t)=0`` and
    ``u2(0)=0, u2(t)=1``; ``v1, v2`` solve the anti-damped equation with the
    same boundary values. ``du*_0`` and ``du*_t`` are the s-derivatives at the
    two endpoints.
    """

    t_final: float
    s: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    du1: np.ndarray
    du2: np.ndarray
    dv1: np.ndarray
    dv2: np.ndarray

    @property
    def du1_0(self):
        return self.du1[0]

    @property
    def du1_t(self):
        return self.du1[-1]

    @property
    def du2_0(self):
        return self.du2[0]

    @property
    def du2_t(self):
        return self.du2[-1]


CAUSTIC_RTOL = 1e-9


def boundary_solutions(fset: FundamentalSolutionSet, t_final: float) -> BoundarySolutions:
    if t_final <= 0:
        raise ConfigError(f"t_final: must be > 0 (got {t_final})")
    k = fset.index(t_final)
    f1t, df1t = fset.f1[k], fset.df1[k]
    g1t = fset.g1[k]
    if abs(f1t) <= CAUSTIC_RTOL * math.hypot(f1t, df1t) or g1t == 0.0:
        raise CausticError(t_final, f1t)
    sl = slice(0, k + 1)
    ratio_f = fset.f2[k] / f1t
    ratio_g = fset.g2[k] / g1t
    return BoundarySolutions(
        t_final=t_final,
        s=fset.t[sl],
        u1=fset.f2[sl] - ratio_f * fset.f1[sl],
        u2=fset.f1[sl] / f1t,
        v1=fset.g2[sl] - ratio_g * fset.g1[sl],
        v2=fset.g1[sl] / g1t,
        du1=fset.df2[sl] - ratio_f * fset.df1[sl],
        du2=fset.df1[sl] / f1t,
        dv1=fset.dg2[sl] - ratio_g * fset.dg1[sl],
        dv2=fset.dg1[sl] / g1t,
    )


TRACE_MARGIN = 1e-10


# -- Floquet analysis ----------------------------------------------------------


@dataclass(frozen=True)
class FloquetExponent:
    mode: str
    mu: complex
    growth_rate: float
    stable: bool
    multipliers: tuple


def monodromy(config: SystemConfig, mode: str, damped: bool = False) -> np.ndarray:
    """One-period propagator of the undamped (default) mode equation."""
    cfg = config if damped else config.replace(g=0.0)
    return period_propagator(cfg, mode).monodromy.copy()


def floquet_exponent(config: SystemConfig, mode: str, stability_tol: float = 1e-9) -> FloquetExponent:
    """Characteristic exponent of the undamped mode equation.

    ``growth_rate = max(0, ln rho(M) / T)``; ``mu`` is reported on the branch
    with ``Im mu >= 0`` and real part folded into ``[0, delta/2]``.
    """
    m = monodromy(config, mode)
    lam = np.linalg.eigvals(m)
    period = config.period
    tr, det = float(np.trace(m)), float(np.linalg.det(m))
    disc = tr * tr - 4.0 * det
    # real multipliers off the unit circle <=> |tr| > 2 for det = 1; the
    # margin absorbs rounding of the trace at the tongue edges
    if disc > 4.0 * TRACE_MARGIN:
        rho = 0.5 * (abs(tr) + math.sqrt(disc))
        growth = max(0.0, math.log(rho) / period)
    else:
        growth = 0.0
    stable = growth <= stability_tol
    small = lam[np.argmin(np.abs(lam))]
    mu = -1j * np.log(complex(small)) / period
    re = abs(mu.real) % config.delta
    if re > config.delta / 2:
        re = config.delta - re
    mu = complex(re, abs(mu.imag))
    if stable:
        mu = complex(mu.real, 0.0)
        growth = 0.0
    return FloquetExponent(mode, mu, growth, stable, tuple(complex(x) for x in lam))

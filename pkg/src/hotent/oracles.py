"""Independent reference solutions.

* A discretized bath: each oscillator couples to ``N`` harmonic modes whose
  couplings sample the Ohmic density ``I(w) = g w exp(-w/cutoff)``. The whole
  closed system is linear, so its Gaussian covariance is propagated exactly
  up to time-stepping error, without any influence-functional algebra.
* Markovian moment equations for each normal mode with small-hbar or
  classical diffusion coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .config import MODES, SystemConfig, omega_sq
from .errors import ConfigError, DomainError, IntegrationError
from .gaussian import ModeCovariance, as_covariance, lab_to_normal, normal_to_lab
from .kernel import diffusion_small_hbar

MIN_MODES = 50
# fourth-order Yoshida composition of a symmetric second-order step
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1


@dataclass(frozen=True)
class DiscretizedBath:
    """Uniform-in-frequency sampling of the cutoff Ohmic density (one copy per oscillator)."""

    frequencies: np.ndarray
    couplings: np.ndarray
    spacing: float
    g: float
    cutoff: float

    @property
    def n_modes(self) -> int:
        return self.frequencies.size

    @property
    def recurrence_time(self) -> float:
        return 2.0 * math.pi / self.spacing

    @property
    def counter_term(self) -> float:
        return float(np.sum(self.couplings ** 2 / self.frequencies ** 2))

    def friction_kernel(self, s) -> np.ndarray:
        """``gamma(s) = sum_k c_k^2 / w_k^2 cos(w_k s)`` (unit masses)."""
        s = np.asarray(s, dtype=float)
        w = self.couplings ** 2 / self.frequencies ** 2
        return np.cos(np.multiply.outer(s, self.frequencies)) @ w

    def spectral_weight(self) -> float:
        """Integrated discrete density ``pi/2 sum c_k^2 / w_k``."""
        return float(0.5 * math.pi * np.sum(self.couplings ** 2 / self.frequencies))


def modes_for_horizon(cutoff: float, horizon: float, factor: float = 2.0) -> int:
    """Smallest mode count with recurrence time ``> factor * horizon``."""
    return max(MIN_MODES, int(math.floor(factor * horizon * 2.0 * cutoff / (2.0 * math.pi))) + 1)


def discretize_bath(config: SystemConfig, n_modes: int, scheme: str = "uniform",
                    horizon: float | None = None) -> DiscretizedBath:
    """Sample ``n_modes`` bath frequencies at midpoints of ``[0, 2 cutoff]``.

    Couplings follow from ``I(w_k) dw = pi/2 c_k^2 / w_k``.

    Raises
    ------
    ConfigError
        If ``n_modes < 50``, the scheme is unknown, or the recurrence time
        ``2 pi / dw`` is shorter than ``horizon`` (natural time units).
    """
    if scheme != "uniform":
        raise ConfigError(f"scheme: only 'uniform' is supported (got {scheme!r})")
    if n_modes < MIN_MODES:
        raise ConfigError(f"n_modes: need at least {MIN_MODES} (got {n_modes})")
    w_max = 2.0 * config.cutoff
    dw = w_max / n_modes
    freqs = (np.arange(n_modes) + 0.5) * dw
    c2 = (2.0 / math.pi) * config.g * freqs ** 2 * np.exp(-freqs / config.cutoff) * dw
    bath = DiscretizedBath(freqs, np.sqrt(c2), dw, config.g, config.cutoff)
    if horizon is not None and bath.recurrence_time < horizon:
        raise ConfigError(
            f"n_modes: recurrence time {bath.recurrence_time:.3g} < horizon {horizon:.3g}; "
            f"use at least {modes_for_horizon(config.cutoff, horizon, 1.0)} modes"
        )
    return bath


# -- closed-system propagation -------------------------------------------------------


@dataclass
class ClosedGaussianState:
    """Covariance of system plus baths in the static normal-mode frame."""

    t: float
    qq: np.ndarray
    qp: np.ndarray
    pp: np.ndarray

    def full(self) -> np.ndarray:
        return np.block([[self.qq, self.qp], [self.qp.T, self.pp]])


class _ClosedSystem:
    """Static quadratic part diagonalized; the drive acts as a rank-2 kick."""

    def __init__(self, bath: DiscretizedBath, config: SystemConfig):
        n = bath.n_modes
        dim = 2 + 2 * n
        v = np.zeros((dim, dim))
        ct = bath.counter_term
        v[0, 0] = v[1, 1] = 1.0 + ct
        v[0, 1] = v[1, 0] = config.kappa0
        idx1 = 2 + np.arange(n)
        idx2 = 2 + n + np.arange(n)
        v[idx1, idx1] = bath.frequencies ** 2
        v[idx2, idx2] = bath.frequencies ** 2
        v[0, idx1] = v[idx1, 0] = -bath.couplings
        v[1, idx2] = v[idx2, 1] = -bath.couplings
        w2, o = np.linalg.eigh(v)
        if w2[0] <= 0:
            raise DomainError("static potential is not positive definite (|kappa0| too large)")
        self.config = config
        self.bath = bath
        self.omega = np.sqrt(w2)
        self.o = o
        self.sys = o[:2, :]            # rows: Q1, Q2 in terms of eta
        self.dim = dim

    def drive(self, t: float):
        """Symmetric 2x2 time-dependent part of the system potential."""
        cfg = self.config
        if cfg.drive_kind == "frequency":
            a = (1.0 + cfg.omega1 * math.sin(cfg.delta * t)) ** 2 - 1.0
            return np.array([[a, 0.0], [0.0, a]])
        a = cfg.kappa1 * math.cos(cfg.delta * t)
        return np.array([[0.0, a], [a, 0.0]])

    def rotate(self, st: ClosedGaussianState, dt: float) -> None:
        if dt == 0.0:
            return
        c = np.cos(self.omega * dt)
        s = np.sin(self.omega * dt)
        d = s / self.omega
        e = -self.omega * s
        qq, qp, pp = st.qq, st.qp, st.pp
        pq = qp.T
        # rows first, then columns
        aq = c[:, None] * qq + d[:, None] * pq
        ap = c[:, None] * qp + d[:, None] * pp
        bq = e[:, None] * qq + c[:, None] * pq
        bp = e[:, None] * qp + c[:, None] * pp
        st.qq = aq * c + ap * d
        st.qp = aq * e + ap * c
        st.pp = bq * e + bp * c

    def kick(self, st: ClosedGaussianState, t: float, dt: float) -> None:
        """``p -> p - dt A q`` with ``A = U B U^T`` of rank two."""
        b = self.drive(t)
        if not np.any(b):
            return
        u = self.sys.T                 # (dim, 2)
        qu = st.qq @ u                 # (dim, 2)
        aq = dt * (qu @ b) @ u.T       # dt * qq A  (dim, dim)
        pu = st.qp.T @ u               # pq U
        st.pp = (st.pp - dt * (pu @ b) @ u.T - dt * u @ (b @ pu.T)
                 + dt * dt * u @ (b @ (u.T @ qu) @ b) @ u.T)
        st.qp = st.qp - aq

    def advance(self, st: ClosedGaussianState, h: float, n: int) -> None:
        """``n`` fourth-order steps of size ``h``; adjacent rotations are merged."""
        pending = 0.0
        t = st.t
        for _ in range(n):
            for w in (_W1, _W0, _W1):
                dt = w * h
                self.rotate(st, pending + 0.5 * dt)
                self.kick(st, t + 0.5 * dt, dt)
                pending = 0.5 * dt
                t += dt
        self.rotate(st, pending)
        st.t = t

    def reduced(self, st: ClosedGaussianState) -> np.ndarray:
        u = self.sys
        qq = u @ st.qq @ u.T
        qp = u @ st.qp @ u.T
        pp = u @ st.pp @ u.T
        return np.block([[qq, qp], [qp.T, pp]])


def _initial_state(system: _ClosedSystem, sys_cov: np.ndarray, theta: float) -> ClosedGaussianState:
    bath = system.bath
    n = bath.n_modes
    dim = system.dim
    w = bath.frequencies
    if theta > 0:
        nth = 1.0 / np.tanh(w / (2.0 * theta))
    else:
        nth = np.ones_like(w)
    qvar = np.concatenate([nth / (2.0 * w)] * 2)
    pvar = np.concatenate([nth * w / 2.0] * 2)
    qq = np.zeros((dim, dim))
    pp = np.zeros((dim, dim))
    qp = np.zeros((dim, dim))
    qq[:2, :2] = sys_cov[:2, :2]
    pp[:2, :2] = sys_cov[2:, 2:]
    qp[:2, :2] = sys_cov[:2, 2:]
    i = np.arange(2, 2 + 2 * n)
    qq[i, i] = qvar
    pp[i, i] = pvar
    o = system.o
    return ClosedGaussianState(0.0, o.T @ qq @ o, o.T @ qp @ o, o.T @ pp @ o)


def evolve_closed(bath: DiscretizedBath, config: SystemConfig, initial, t_grid,
                  steps_per_period: int = 64, return_state: bool = False):
    """Reduced 4x4 system covariance of the closed system at each ``t_grid`` time.

    The bath starts in its own thermal state at ``config.theta``, uncorrelated
    with the system. Propagation is exact rotation of the static normal modes
    interleaved with the drive kick, composed to fourth order.

    Raises
    ------
    ConfigError
        If ``t_grid`` extends beyond the bath recurrence time.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(np.diff(t_grid) < 0) or t_grid[0] < 0:
        raise ConfigError("t_grid must be non-empty, non-negative and increasing")
    if t_grid[-1] > bath.recurrence_time:
        raise ConfigError(
            f"t_grid: horizon {t_grid[-1]:.3g} exceeds the bath recurrence time "
            f"{bath.recurrence_time:.3g}"
        )
    cov0 = as_covariance(initial)
    system = _ClosedSystem(bath, config)
    st = _initial_state(system, cov0, config.theta)
    h_max = config.period / steps_per_period
    out = np.empty((t_grid.size, 4, 4))
    for i, target in enumerate(t_grid):
        span = target - st.t
        if span > 0:
            n = max(1, int(math.ceil(span / h_max - 1e-9)))
            system.advance(st, span / n, n)
        st.t = target
        out[i] = system.reduced(st)
    if return_state:
        return out, st, system
    return out


def symplectic_spectrum_full(state: ClosedGaussianState) -> np.ndarray:
    """Sorted symplectic eigenvalues of the full closed-system covariance."""
    sig = state.full()
    n = sig.shape[0] // 2
    omega = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    ev = np.linalg.eigvals(omega @ sig)
    return np.sort(np.abs(ev.imag))[::2]


# -- Markovian moment equations ----------------------------------------------------------


QME_VARIANTS = ("small_hbar", "classical")


@dataclass
class QMETrajectory:
    t: np.ndarray
    modes: dict             # mode -> (n, 3) array of (sxx, sxp, spp)
    cross: np.ndarray       # (n, 2, 2)
    variant: str

    def lab(self) -> np.ndarray:
        out = np.empty((self.t.size, 4, 4))
        for i in range(self.t.size):
            p = ModeCovariance(*self.modes["+"][i], "+")
            m = ModeCovariance(*self.modes["-"][i], "-")
            out[i] = normal_to_lab(p, m, self.cross[i])
        return out


def _diffusion(config: SystemConfig, variant: str, w2):
    if variant == "classical":
        return config.g * config.theta, 0.0
    d = diffusion_small_hbar(config.theta, config.g, w2)
    return float(d.d_pp), float(d.d_px)


def qme_moment_evolve(config: SystemConfig, initial, t_grid, variant: str = "small_hbar",
                      rtol: float = 1e-10, atol: float = 1e-12) -> QMETrajectory:
    """Integrate the second-moment equations of the Markovian master equation.

    Per mode::

        sxx' = 2 sxp
        sxp' = spp - W^2 sxx - g sxp + D_px
        spp' = -2 W^2 sxp - 2 g spp + 2 D_pp

    The cross block between the modes has no noise source and evolves with
    the two drift matrices.
    """
    if variant not in QME_VARIANTS:
        raise ConfigError(f"variant: must be one of {QME_VARIANTS}")
    if variant == "small_hbar" and config.theta <= 0:
        raise DomainError("small-hbar diffusion needs theta > 0")
    t_grid = np.asarray(t_grid, dtype=float)
    plus, minus, cross = lab_to_normal(initial)
    g = config.g

    def rhs(t, y):
        out = np.empty(10)
        w = []
        for j, mode in enumerate(MODES):
            w2 = float(omega_sq(config, mode, t))
            w.append(w2)
            sxx, sxp, spp = y[3 * j:3 * j + 3]
            d_pp, d_px = _diffusion(config, variant, w2)
            out[3 * j] = 2.0 * sxp
            out[3 * j + 1] = spp - w2 * sxx - g * sxp + d_px
            out[3 * j + 2] = -2.0 * w2 * sxp - 2.0 * g * spp + 2.0 * d_pp
        c = y[6:].reshape(2, 2)
        a_p = np.array([[0.0, 1.0], [-w[0], -g]])
        a_m = np.array([[0.0, 1.0], [-w[1], -g]])
        out[6:] = (a_p @ c + c @ a_m.T).ravel()
        return out

    y0 = np.concatenate([[plus.sxx, plus.sxp, plus.spp], [minus.sxx, minus.sxp, minus.spp],
                         np.asarray(cross).ravel()])
    t0 = 0.0
    sol = solve_ivp(rhs, (t0, float(t_grid[-1])), y0, method="DOP853", t_eval=t_grid,
                    rtol=rtol, atol=atol, max_step=config.period / 16)
    if not sol.success:
        raise IntegrationError(f"moment equations failed: {sol.message}", time=float(sol.t[-1]))
    y = sol.y.T
    return QMETrajectory(t_grid, {"+": y[:, 0:3], "-": y[:, 3:6]}, y[:, 6:].reshape(-1, 2, 2),
                         variant)

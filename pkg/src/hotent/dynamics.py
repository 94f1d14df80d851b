"""Exact Gaussian dynamics of the two driven, damped normal modes.

Each normal mode obeys the quantum Langevin equation

    x'' + g x' + Omega^2(t) x = xi(t),    <{xi(s1), xi(s2)}>/2 = K(s1 - s2),

started from a factorized system-bath state. The second moments split into a
homogeneous part and a bath-noise part,

    sigma(t) = Phi(t) J sigma0 J^T Phi(t)^T + N(t),
    N(t) = Int Int G(t, s1) G(t, s2)^T K(s1 - s2) ds1 ds2,   G(t, s) = Phi(t, s) e_p,

with ``J`` the momentum kick ``p -> p - g x`` at ``t = 0+``. ``N`` is expressed
through the influence coefficients as ``N_xx = 2 f1^2 a11`` etc.

``N`` is accumulated on the noise grid ``t_k = k h`` by product integration:
``G(t, s)`` is interpolated linearly in ``s`` between grid points and the
double integral against K is done exactly through precomputed hat weights.
Going from ``t_k`` to ``t_{k+1}`` only the new interval contributes, so each
step costs one memory sum over the last ``memory_time`` of lags. Because the
drive is periodic the memory sums only depend on the drive phase once the
memory is full, and they are tabulated once per phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .config import MODES, SystemConfig
from .errors import ConfigError, DivergenceError, DomainError
from .floquet import period_propagator
from .gaussian import (
    EntanglementResult,
    ModeCovariance,
    MomentVector,
    as_covariance,
    lab_to_normal,
    log_negativity,
    normal_to_lab,
)
from .kernel import HatWeights, a_from_noise, hat_weights, kernel_series

DIVERGENCE_GUARD = 1e12
PRECISION_LIMIT = 1e11
PHYSICAL_ATOL = 1e-6
FORMULAS = ("consistent", "printed")


# -- noise machinery -----------------------------------------------------------


@lru_cache(maxsize=32)
def _weights(theta: float, cutoff: float, g: float, h: float, max_lag: int) -> HatWeights:
    kernel = lambda s: kernel_series(np.abs(s), theta, cutoff, g)
    return hat_weights(kernel, h, max_lag, 1.0 / cutoff)


def _lag_table(steps: np.ndarray, max_lag: int) -> np.ndarray:
    """``tab[p, l] = Phi(t_p, t_p - l h) e_p`` for phases ``p`` and lags ``l <= max_lag``."""
    n = steps.shape[0]
    tab = np.empty((n, max_lag + 1, 2))
    prod = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    tab[:, 0] = prod[:, :, 1]
    phases = np.arange(n)
    for lag in range(1, max_lag + 1):
        prod = prod @ steps[(phases - lag) % n]
        tab[:, lag] = prod[:, :, 1]
    return tab


def _memory_sums(tab: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Cumulative memory sums ``cum[p, m, a] = sum_{d=1..m} sum_b w[d,a,b] tab[p, d-b]``."""
    n, lags = tab.shape[0], tab.shape[1] - 1
    terms = np.zeros((n, lags + 1, 2, 2))
    d = np.arange(1, lags + 1)
    for a in range(2):
        terms[:, 1:, a] = (w[1:, a, 0, None] * tab[:, d]) + (w[1:, a, 1, None] * tab[:, d - 1])
    return np.cumsum(terms, axis=1)


@dataclass
class NoiseSchedule:
    """Per-step sources ``S_k`` of the noise covariance for one normal mode.

    ``N_{k+1} = T_k N_k T_k^T + S_k`` where ``T_k`` is the grid-step
    propagator. Sources for ``k >= max_lag`` depend only on the drive phase.
    """

    steps: np.ndarray       # (G, 2, 2)
    sources: np.ndarray     # (max_lag + G, 3) as (xx, xp, pp)
    max_lag: int

    def source(self, k: int) -> np.ndarray:
        if k < self.max_lag:
            return self.sources[k]
        g = self.steps.shape[0]
        return self.sources[self.max_lag + (k - self.max_lag) % g]


def noise_schedule(config: SystemConfig, mode: str) -> NoiseSchedule:
    prop = period_propagator(config, mode)
    steps = prop.grid_steps
    n_phase = steps.shape[0]
    h = config.grid_step
    max_lag = max(1, int(math.ceil(config.memory_time / h)))
    if config.g == 0.0:
        return NoiseSchedule(steps, np.zeros((max_lag + n_phase, 3)), max_lag)
    w = _weights(float(config.theta), float(config.cutoff), float(config.g), h, max_lag).w
    tab = _lag_table(steps, max_lag)
    cum = _memory_sums(tab, w)
    k = np.arange(max_lag + n_phase)
    p = k % n_phase
    m = np.minimum(k, max_lag)
    mu = cum[p, m]                                   # (K, a, 2)
    t = steps[p]                                     # (K, 2, 2)
    e2 = np.array([0.0, 1.0])
    g0 = t[:, :, 1]                                  # T e_p
    g1 = np.broadcast_to(e2, g0.shape)
    gv = (g0, g1)
    tmu = np.einsum("kij,kaj->kai", t, mu)
    src = np.zeros((k.size, 2, 2))
    for a in range(2):
        cross = gv[a][:, :, None] * tmu[:, a, None, :]
        src += cross + np.swapaxes(cross, 1, 2)
        for b in range(2):
            src += w[0, a, b] * gv[a][:, :, None] * gv[b][:, None, :]
    sources = np.stack([src[:, 0, 0], 0.5 * (src[:, 0, 1] + src[:, 1, 0]), src[:, 1, 1]], axis=1)
    return NoiseSchedule(steps, sources, max_lag)


# -- trajectories ----------------------------------------------------------------


@dataclass
class ModeTrajectory:
    """Sampled evolution of one normal mode.

    ``phi`` holds the fundamental matrix ``[[f2, f1], [f2', f1']]`` at each
    sample, ``noise`` the bath part ``N`` as ``(xx, xp, pp)`` and
    ``covariance`` the full ``(sxx, sxp, spp)``.
    """

    mode: str
    t: np.ndarray
    phi: np.ndarray
    noise: np.ndarray
    covariance: np.ndarray
    means: np.ndarray
    formula: str = "consistent"

    def mode_covariance(self, i: int) -> ModeCovariance:
        c = self.covariance[i]
        return ModeCovariance(float(c[0]), float(c[1]), float(c[2]), self.mode)

    def moments(self, i: int) -> MomentVector:
        return MomentVector(float(self.means[i, 0]), float(self.means[i, 1]))

    def truncated(self, n: int) -> "ModeTrajectory":
        return ModeTrajectory(self.mode, self.t[:n], self.phi[:n], self.noise[:n],
                              self.covariance[:n], self.means[:n], self.formula)

    def influence(self):
        """``(a11, a12, a22)`` per sample, recovered from the noise covariance.

        Undefined (NaN) at ``t = 0`` and wherever ``f1`` vanishes.
        """
        f1, df1 = self.phi[:, 0, 1], self.phi[:, 1, 1]
        ok = np.abs(f1) > 1e-9 * np.hypot(f1, df1)
        safe = np.where(ok, f1, 1.0)
        out = np.array(a_from_noise(safe, df1, *self.noise.T))
        out[:, ~ok] = np.nan
        return out


def _kick(g: float, formula: str) -> np.ndarray:
    c = g if formula == "consistent" else 0.5 * g
    return np.array([[1.0, 0.0], [-c, 1.0]])


def _homogeneous(phi: np.ndarray, sigma0: np.ndarray, g: float, formula: str) -> np.ndarray:
    """Homogeneous part ``(xx, xp, pp)`` for a stack of fundamental matrices."""
    m = phi @ _kick(g, formula)
    hom = m @ sigma0 @ np.swapaxes(m, 1, 2)
    out = np.stack([hom[:, 0, 0], hom[:, 0, 1], hom[:, 1, 1]], axis=1)
    if formula == "printed":
        # printed sigma_xp carries f1' sigma0_pp instead of f1 f1' sigma0_pp
        f1, df1 = phi[:, 0, 1], phi[:, 1, 1]
        out[:, 1] += (df1 - f1 * df1) * sigma0[1, 1]
    return out


def _run_modes(config: SystemConfig, n_steps: int, stride: int, guard: float):
    """Step both modes on the noise grid; returns sampled ``Phi`` and ``N`` per mode."""
    scheds = [noise_schedule(config, m) for m in MODES]
    n_phase = scheds[0].steps.shape[0]
    n_samples = n_steps // stride + 1
    phis = np.empty((2, n_samples, 2, 2))
    noises = np.empty((2, n_samples, 3))
    phis[:, 0] = np.eye(2)
    noises[:, 0] = 0.0
    state = []
    for s in scheds:
        state.append([1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])  # phi (row major) + N (xx, xp, pp)
    steps = [s.steps.tolist() for s in scheds]
    srcs = [s.sources.tolist() for s in scheds]
    max_lag = scheds[0].max_lag
    stopped = None
    for k in range(n_steps):
        p = k % n_phase
        row = k if k < max_lag else max_lag + (k - max_lag) % n_phase
        for j in range(2):
            (t00, t01), (t10, t11) = steps[j][p]
            a, b, c, d, nxx, nxp, npp = state[j]
            sxx, sxp, spp = srcs[j][row]
            # N <- T N T^T + S
            u0 = t00 * nxx + t01 * nxp
            u1 = t00 * nxp + t01 * npp
            v0 = t10 * nxx + t11 * nxp
            v1 = t10 * nxp + t11 * npp
            state[j] = [
                t00 * a + t01 * c, t00 * b + t01 * d, t10 * a + t11 * c, t10 * b + t11 * d,
                u0 * t00 + u1 * t01 + sxx, v0 * t00 + v1 * t01 + sxp, v0 * t10 + v1 * t11 + spp,
            ]
        if (k + 1) % stride == 0:
            i = (k + 1) // stride
            for j in range(2):
                st = state[j]
                phis[j, i] = ((st[0], st[1]), (st[2], st[3]))
                noises[j, i] = st[4:]
            scale = max(abs(phis[0, i]).max(), abs(phis[1, i]).max()) ** 2 + max(
                noises[0, i].max(), noises[1, i].max())
            if scale > guard:
                stopped = i
                break
    if stopped is not None:
        phis, noises = phis[:, :stopped + 1], noises[:, :stopped + 1]
    return phis, noises, stopped


@dataclass
class Trajectory:
    """Sampled lab-frame evolution of the oscillator pair."""

    config: SystemConfig
    t: np.ndarray
    covariance: np.ndarray                 # (n, 4, 4)
    entanglement: list
    modes: dict
    cross: np.ndarray                      # (n, 2, 2)
    means: np.ndarray                      # (n, 4) lab ordering
    metadata: dict = field(default_factory=dict)

    @property
    def log_negativity(self) -> np.ndarray:
        return np.array([e.log_negativity for e in self.entanglement])

    @property
    def samples_per_period(self) -> int:
        return self.config.samples_per_period

    def index(self, t: float) -> int:
        """Index of the sample nearest to ``t``."""
        if t < 0 or t > self.t[-1] + 0.5 * (self.t[1] - self.t[0]):
            raise DomainError(f"t={t} lies outside the trajectory [0, {self.t[-1]:.6g}]")
        return int(np.argmin(np.abs(self.t - t)))

    def at(self, t: float) -> np.ndarray:
        return self.covariance[self.index(t)]

    def mode_covariance(self, i: int):
        return self.modes["+"].mode_covariance(i), self.modes["-"].mode_covariance(i)


def evolve_mode(config: SystemConfig, mode: str, initial: ModeCovariance,
                moments: Optional[MomentVector] = None, formula: str = "consistent",
                horizon: Optional[float] = None) -> ModeTrajectory:
    """Evolve a single normal mode from ``initial``.

    ``formula="printed"`` evaluates the homogeneous part with the
    coefficients exactly as commonly printed (half kick, and ``f1'`` in place
    of ``f1 f1'`` in the ``sigma0_pp`` term of ``sigma_xp``); it exists only for
    comparison.
    """
    if mode not in MODES:
        raise ConfigError(f"mode: must be '+' or '-' (got {mode!r})")
    if formula not in FORMULAS:
        raise ConfigError(f"formula: must be one of {FORMULAS}")
    if not initial.is_physical():
        raise DomainError("initial mode covariance violates the uncertainty relation")
    moments = moments or MomentVector()
    traj = _evolve(config, horizon)
    j = MODES.index(mode)
    return _mode_trajectory(config, mode, traj[0][j], traj[1][j], traj[2], initial.as_matrix(),
                            moments.as_array(), formula)


def _evolve(config: SystemConfig, horizon: Optional[float], guard: float = DIVERGENCE_GUARD):
    horizon = config.horizon if horizon is None else horizon
    if horizon <= 0:
        raise ConfigError(f"horizon: must be > 0 (got {horizon})")
    g_per = config.grid_per_period
    stride = g_per // config.samples_per_period
    n_steps = int(round(horizon * g_per))
    n_steps -= n_steps % stride
    if n_steps == 0:
        raise ConfigError("horizon: shorter than one sampling interval")
    phis, noises, stopped = _run_modes(config, n_steps, stride, guard)
    t = np.arange(phis.shape[1]) * (config.period / config.samples_per_period)
    return phis, noises, t, stopped


def _mode_trajectory(config, mode, phi, noise, t, sigma0, mean0, formula):
    hom = _homogeneous(phi, sigma0, config.g, formula)
    cov = hom + noise
    cov[0] = (sigma0[0, 0], sigma0[0, 1], sigma0[1, 1])
    means = phi @ _kick(config.g, formula) @ mean0
    means[0] = mean0
    return ModeTrajectory(mode, t, phi, noise, cov, means, formula)


def evolve_full(config: SystemConfig, initial=None, horizon: Optional[float] = None,
                formula: str = "consistent", means=None,
                guard: float = DIVERGENCE_GUARD) -> Trajectory:
    """Evolve the lab covariance; defaults to the thermal product at the bath temperature.

    The run stops early (``metadata['stopped_at']``) once the covariance
    norm exceeds ``guard``.
    """
    from .gaussian import make_thermal_product

    if formula not in FORMULAS:
        raise ConfigError(f"formula: must be one of {FORMULAS}")
    cov0 = make_thermal_product(config.theta) if initial is None else as_covariance(initial)
    log_negativity(cov0)  # physicality check
    plus0, minus0, cross0 = lab_to_normal(cov0)
    m_lab = np.zeros(4) if means is None else np.asarray(means, dtype=float)
    from .gaussian import NORMAL_ROTATION

    m_norm = NORMAL_ROTATION @ m_lab
    phis, noises, t, stopped = _evolve(config, horizon, guard)
    modes = {}
    for j, (mode, init) in enumerate((("+", plus0), ("-", minus0))):
        mean0 = np.array([m_norm[j], m_norm[j + 2]])
        modes[mode] = _mode_trajectory(config, mode, phis[j], noises[j], t, init.as_matrix(),
                                       mean0, formula)
    kick = _kick(config.g, formula)
    mp, mm = phis[0] @ kick, phis[1] @ kick
    cross = mp @ cross0 @ np.swapaxes(mm, 1, 2)
    cross[0] = cross0
    n = t.size
    covs = np.empty((n, 4, 4))
    lab_means = np.empty((n, 4))
    ents = []
    worst = math.inf
    precision_lost = None
    for i in range(n):
        pc, mc = modes["+"].mode_covariance(i), modes["-"].mode_covariance(i)
        c = normal_to_lab(pc, mc, cross[i])
        covs[i] = c
        mp_, mm_ = modes["+"].means[i], modes["-"].means[i]
        lab_means[i] = NORMAL_ROTATION @ np.array([mp_[0], mm_[0], mp_[1], mm_[1]])
        try:
            res = log_negativity(c, atol=PHYSICAL_ATOL)
        except DomainError:
            # the determinant carries an absolute rounding error ~ eps |c|^2
            if np.max(np.abs(c)) ** 2 * np.finfo(float).eps <= 1e-3:
                raise
            # rounding in the growing part, not physics: end the run here
            precision_lost = i
            break
        ents.append(res)
    if precision_lost is not None:
        n = precision_lost
        t, covs, cross, lab_means = t[:n], covs[:n], cross[:n], lab_means[:n]
        modes = {k: m.truncated(n) for k, m in modes.items()}
        stopped = n - 1
    meta = {"stopped_at": None if stopped is None else float(t[-1]), "formula": formula,
            "guard": guard, "precision_lost": precision_lost is not None, "shifted_samples": []}
    return Trajectory(config, t, covs, ents, modes, cross, lab_means, meta)


# -- steady state ----------------------------------------------------------------


@dataclass
class SteadyStateReport:
    converged: bool
    covariance: np.ndarray
    log_negativity: float
    period_index: Optional[int]
    residual: float
    criterion: str
    covariance_bounded: bool
    period_log_negativity: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "log_negativity": self.log_negativity,
            "period_index": self.period_index,
            "residual": self.residual,
            "criterion": self.criterion,
            "covariance_bounded": self.covariance_bounded,
            "covariance": self.covariance.tolist(),
        }


def damped_growth(config: SystemConfig) -> float:
    """Largest Floquet growth rate of the damped mode equations (negative if stable)."""
    out = -math.inf
    for mode in MODES:
        m = period_propagator(config, mode).monodromy
        rho = float(np.max(np.abs(np.linalg.eigvals(m))))
        out = max(out, math.log(rho) / config.period if rho > 0 else -math.inf)
    return out


def period_averages(traj: Trajectory):
    """Drive-period means of the covariance and of E_N (complete periods only)."""
    spp = traj.samples_per_period
    n_per = (traj.t.size - 1) // spp
    covs = traj.covariance[1:1 + n_per * spp].reshape(n_per, spp, 4, 4).mean(axis=1)
    ens = traj.log_negativity[1:1 + n_per * spp].reshape(n_per, spp).mean(axis=1)
    return covs, ens


def steady_state(traj: Trajectory, tolerance: float = 1e-3, window: int = 3,
                 raise_on_divergence: bool = True,
                 precision_limit: float = PRECISION_LIMIT) -> SteadyStateReport:
    """Detect a steady state from drive-period averages.

    If the damped mode equations are stable the averaged covariance must
    settle: the relative Frobenius change between consecutive period averages
    stays below ``tolerance`` from the reported period to the end of the run
    (at least ``window`` periods). Inside an instability tongue the covariance
    grows without bound while the entanglement saturates; there the same test
    is applied to the absolute change of the period-averaged E_N, after a
    burn-in long enough for the initial state to be outweighed by a factor
    ``1/tolerance`` (relative rate ``2 lambda``, the damped Floquet growth). Only periods whose covariance entries stay
    below ``precision_limit`` are used: beyond it the small symplectic
    eigenvalue loses digits to cancellation against the growing part.

    Raises
    ------
    DivergenceError
        If no steady state was found and the covariance overflowed the guard.
    """
    covs, ens = period_averages(traj)
    n_all = ens.size
    spp = traj.samples_per_period
    peaks = np.abs(traj.covariance[1:1 + n_all * spp]).reshape(n_all, -1).max(axis=1)
    n_per = int(np.argmax(peaks > precision_limit)) if np.any(peaks > precision_limit) else n_all
    covs, ens = covs[:n_per], ens[:n_per]
    if n_all < window + 2:
        raise DomainError(f"trajectory too short: {n_per} periods for window {window}")
    cfg = traj.config
    lam = damped_growth(cfg)
    bounded = lam < 0
    burn = 0
    if bounded:
        norms = np.linalg.norm(covs, axis=(1, 2))
        res = np.linalg.norm(np.diff(covs, axis=0), axis=(1, 2)) / np.maximum(norms[1:], 1e-300)
        criterion = "covariance"
    else:
        res = np.abs(np.diff(ens))
        criterion = "log_negativity"
        rate = 2.0 * lam
        burn = int(math.ceil(math.log(1.0 / tolerance) / (rate * cfg.period)))
    # res[i] compares period i+1 with period i; find the start of the final quiet run
    quiet = res < tolerance
    start = res.size
    while start > 0 and quiet[start - 1]:
        start -= 1
    found = max(start, burn) + 1
    last = float(res[-1]) if res.size else math.inf
    if n_per - found < window:
        stopped = traj.metadata.get("stopped_at")
        if n_per < n_all and stopped is None:
            stopped = float(traj.t[1 + n_per * spp])
        if stopped is not None and raise_on_divergence:
            if traj.metadata.get("precision_lost"):
                why = "covariance lost precision to rounding"
            else:
                why = f"covariance exceeded {min(traj.metadata['guard'], precision_limit):.0e}"
            raise DivergenceError(f"{why} at t={stopped:.6g} before a steady state was reached",
                                  period_index=n_per)
        return SteadyStateReport(False, covs[-1], float(ens[-1]), None, last, criterion, bounded, ens)
    tail = slice(n_per - window, n_per)
    return SteadyStateReport(True, covs[tail].mean(axis=0), float(ens[tail].mean()), found,
                             float(res[found - 1:].max()), criterion, bounded, ens)


# -- reports -----------------------------------------------------------------------


@dataclass(frozen=True)
class ModeEllipse:
    mode: str
    variances: tuple
    angle: float


def mode_squeezing_report(traj: Trajectory, t: float):
    """Principal variances (ascending) and minor-axis angle of each mode at ``t``."""
    i = traj.index(t)
    out = {}
    for mode in MODES:
        var, ang = traj.modes[mode].mode_covariance(i).ellipse()
        out[mode] = ModeEllipse(mode, var, ang)
    return out


def position_spread(traj: Trajectory, t: float) -> float:
    """Standard deviation of Q1 at the sample nearest to ``t`` (natural units)."""
    return math.sqrt(traj.at(t)[0, 0])

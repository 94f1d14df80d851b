"""Steady-state entanglement, boundary bisection and parameter scans."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .config import MODES, SystemConfig
from .dynamics import damped_growth, evolve_full, period_averages, steady_state
from .errors import ConfigError, DivergenceError, DomainError
from .floquet import floquet_exponent
from .gaussian import gibbs_covariance, log_negativity

SCAN_AXES = ("theta", "kappa1", "g", "delta", "kappa0")
MAX_PERIODS = 600


def analytic_boundary(config: SystemConfig) -> float:
    """Temperature below which driving sustains entanglement: ``growth_rate / g``."""
    if config.g <= 0:
        raise DomainError("the analytic boundary needs g > 0")
    growth = max(floquet_exponent(config, m).growth_rate for m in MODES)
    return growth / config.g


@dataclass
class SteadyResult:
    log_negativity: float
    converged: bool
    periods: int
    status: str
    report: Optional[object] = None


def required_periods(config: SystemConfig, tolerance: float = 1e-3, window: int = 10) -> int:
    """Horizon long enough for the steady-state test at ``tolerance``."""
    # memory of the initial state fades at 2|lambda|, both inside the tongue
    # (growing noise swamps it) and outside (contraction)
    rate = 2.0 * abs(damped_growth(config))
    burn = math.log(10.0 / tolerance) / max(rate, 1e-12) / config.period
    return int(min(MAX_PERIODS, max(config.horizon, math.ceil(burn) + window + 5)))


def _last_average(traj) -> float:
    _, ens = period_averages(traj)
    return float(ens[-1]) if ens.size else float(traj.log_negativity[-1])


def steady_entanglement(config: SystemConfig, initial=None, tolerance: float = 1e-3,
                        window: int = 10, max_periods: int = MAX_PERIODS) -> SteadyResult:
    """Period-averaged steady E_N, extending the run until the test can pass."""
    periods = min(required_periods(config, tolerance, window), max_periods)
    traj = evolve_full(config, initial, horizon=periods)
    try:
        rep = steady_state(traj, tolerance=tolerance, window=window)
    except DivergenceError:
        return SteadyResult(_last_average(traj), False, periods, "diverged")
    except DomainError:
        return SteadyResult(_last_average(traj), False, periods, "too_short")
    status = "converged" if rep.converged else "nonconvergent"
    return SteadyResult(rep.log_negativity, rep.converged, periods, status, rep)


@dataclass
class BoundaryPoint:
    kappa1: float
    g: float
    theta_sim: float
    theta_analytic: float
    status: str
    flagged: bool = False
    evaluations: list = field(default_factory=list)

    @property
    def relative_error(self) -> float:
        if self.theta_analytic == 0 or not math.isfinite(self.theta_sim):
            return math.nan
        return (self.theta_sim - self.theta_analytic) / self.theta_analytic


def bisect_boundary(config: SystemConfig, eps: float = 1e-3, depth: int = 12,
                    lo: float = 0.1, hi: Optional[float] = None, window: int = 10) -> BoundaryPoint:
    """Largest temperature with steady ``E_N > eps``, by bisection in theta.

    The bracket defaults to ``[0.1, 2 theta_analytic + 10]``. Points whose
    steady state could not be established are flagged, not fatal.
    """
    theta_a = analytic_boundary(config)
    hi = 2.0 * theta_a + 10.0 if hi is None else hi
    if not 0 <= lo < hi:
        raise ConfigError(f"boundary bracket: need 0 <= lo < hi (got {lo}, {hi})")
    evals = []
    flagged = False

    def entangled(theta):
        nonlocal flagged
        res = steady_entanglement(config.replace(theta=theta), window=window)
        evals.append((theta, res.log_negativity, res.status))
        flagged |= not res.converged
        return res.log_negativity > eps

    if not entangled(lo):
        return BoundaryPoint(config.kappa1, config.g, 0.0, theta_a, "below_bracket", flagged, evals)
    if entangled(hi):
        return BoundaryPoint(config.kappa1, config.g, hi, theta_a, "above_bracket", flagged, evals)
    a, b = lo, hi
    for _ in range(depth):
        mid = 0.5 * (a + b)
        if entangled(mid):
            a = mid
        else:
            b = mid
    return BoundaryPoint(config.kappa1, config.g, 0.5 * (a + b), theta_a,
                         "flagged" if flagged else "ok", flagged, evals)


# -- scan specification ------------------------------------------------------------


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if self.name not in SCAN_AXES:
            raise ConfigError(f"axis: {self.name!r} is not one of {SCAN_AXES}")
        if self.count < 2:
            raise ConfigError(f"axis {self.name}: count must be >= 2")
        if not self.stop > self.start:
            raise ConfigError(f"axis {self.name}: empty range [{self.start}, {self.stop}]")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    @classmethod
    def parse(cls, text: str) -> "Axis":
        """Parse ``name=start:stop:count``."""
        try:
            name, rng = text.split("=", 1)
            start, stop, count = rng.split(":")
            return cls(name.strip(), float(start), float(stop), int(count))
        except ValueError:
            raise ConfigError(f"axis: expected name=start:stop:count (got {text!r})") from None


@dataclass(frozen=True)
class ScanSpec:
    axes: tuple
    base: SystemConfig
    eps: float = 1e-3
    depth: int = 12
    window: int = 10

    def __post_init__(self):
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ConfigError("scan axes must be distinct")

    def grid(self):
        """Yield ``(index, config)`` over the Cartesian product of the axes."""
        vals = [a.values() for a in self.axes]
        for idx in np.ndindex(*[len(v) for v in vals]):
            changes = {a.name: float(v[i]) for a, v, i in zip(self.axes, vals, idx)}
            yield idx, self.base.replace(**changes)


def run_jobs(fn: Callable, jobs: Sequence, workers: int = 1) -> list:
    """Map ``fn`` over ``jobs``; results keep the job order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _boundary_job(args):
    cfg, eps, depth, window, bracket = args
    try:
        return bisect_boundary(cfg, eps=eps, depth=depth, window=window, **bracket)
    except DomainError as exc:
        return BoundaryPoint(cfg.kappa1, cfg.g, math.nan, math.nan, f"error: {exc}", True)


def boundary_scan(base: SystemConfig, kappa1_values, eps: float = 1e-3, depth: int = 12,
                  window: int = 10, workers: int = 1, lo: float = 0.1,
                  hi: Optional[float] = None) -> list:
    bracket = {"lo": lo, "hi": hi}
    jobs = [(base.replace(kappa1=float(k)), eps, depth, window, bracket) for k in kappa1_values]
    return run_jobs(_boundary_job, jobs, workers)


# -- equilibrium and exponent maps ---------------------------------------------------


@dataclass
class EquilibriumPoint:
    theta: float
    kappa0: float
    log_negativity: float
    valid: bool


def equilibrium_point(theta: float, kappa0: float) -> EquilibriumPoint:
    """E_N of the Gibbs state of the statically coupled pair (weak bath coupling)."""
    try:
        cov = gibbs_covariance(kappa0, theta)
    except DomainError:
        return EquilibriumPoint(theta, kappa0, math.nan, False)
    return EquilibriumPoint(theta, kappa0, log_negativity(cov).log_negativity, True)


def equilibrium_diagram(thetas, kappa0s) -> list:
    return [equilibrium_point(float(t), float(k)) for t in thetas for k in kappa0s]


def equilibrium_boundary(kappa0: float, lo: float = 1e-3, hi: float = 10.0, depth: int = 60) -> float:
    """Temperature where the Gibbs-state E_N reaches zero (0 if never entangled)."""
    if equilibrium_point(lo, kappa0).log_negativity <= 0:
        return 0.0
    for _ in range(depth):
        mid = 0.5 * (lo + hi)
        if equilibrium_point(mid, kappa0).log_negativity > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class ExponentPoint:
    kappa1: float
    delta: float
    growth_plus: float
    growth_minus: float
    stable: bool


def _exponent_job(cfg: SystemConfig) -> ExponentPoint:
    fp = floquet_exponent(cfg, "+")
    fm = floquet_exponent(cfg, "-")
    return ExponentPoint(cfg.kappa1, cfg.delta, fp.growth_rate, fm.growth_rate,
                         fp.stable and fm.stable)


def exponent_map(base: SystemConfig, kappa1_values, delta_values, workers: int = 1) -> list:
    jobs = [base.replace(kappa1=float(k), delta=float(d)) for k in kappa1_values for d in delta_values]
    return run_jobs(_exponent_job, jobs, workers)

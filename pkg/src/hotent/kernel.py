"""Bath noise kernel, influence coefficients and diffusion coefficients.

The symmetrized noise correlation of an Ohmic bath with exponential cutoff is

    K(s) = (g/pi) * Int_0^inf dw  w coth(w / 2 theta) cos(w s) exp(-w / cutoff)

(natural units). With this normalization the friction ``g x'`` and the noise
obey the fluctuation-dissipation relation, ``Int K ds = 2 g theta`` over the
real line. Two independent evaluations are provided: Fourier quadrature and a
Bose image series summed in closed form through the complex trigamma function,

    K(s) = (g/pi) Re[ L^2/(1 - i L s)^2 + 2 theta^2 psi'(1 + theta/L - i theta s) ].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.linalg import toeplitz

from .errors import CausticError, ConfigError, DomainError, KernelAccuracyError
from .floquet import BoundarySolutions

KERNEL_RTOL = 1e-6
KERNEL_FAIL_RTOL = 1e-5

_SHIFT = 16
# Bernoulli terms of the asymptotic trigamma expansion: B_{2k} / w^{2k+1}
_BERNOULLI = (1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66, -691.0 / 2730, 7.0 / 6)


def trigamma(w) -> np.ndarray:
    """Complex trigamma ``psi'(w)`` for ``Re w > 0``."""
    w = np.asarray(w, dtype=complex)
    acc = np.zeros_like(w)
    for k in range(_SHIFT):
        acc += 1.0 / (w + k) ** 2
    z = w + _SHIFT
    inv = 1.0 / z
    inv2 = inv * inv
    tail = inv + 0.5 * inv2
    p = inv * inv2
    for b in _BERNOULLI:
        tail += b * p
        p = p * inv2
    return acc + tail


def kernel_series(s, theta: float, cutoff: float, g: float = 1.0) -> np.ndarray:
    """Noise kernel from the closed-form image series."""
    if theta < 0:
        raise DomainError(f"theta must be >= 0, got {theta}")
    if cutoff <= 0:
        raise DomainError(f"cutoff must be > 0, got {cutoff}")
    s = np.asarray(s, dtype=float)
    out = (cutoff ** 2 / (1.0 - 1j * cutoff * s) ** 2).real
    if theta > 0:
        out = out + 2.0 * theta ** 2 * trigamma(1.0 + theta / cutoff - 1j * theta * s).real
    return (g / math.pi) * out


def _spectral(w, theta, cutoff):
    w = np.asarray(w, dtype=float)
    if theta == 0:
        return w * np.exp(-w / cutoff)
    x = w / (2.0 * theta)
    small = x < 1e-8
    safe = np.where(small, 1.0, x)
    val = np.where(small, 2.0 * theta, w / np.tanh(safe))
    return val * np.exp(-w / cutoff)


def kernel_quadrature(s, theta: float, cutoff: float, g: float = 1.0,
                      epsabs: float = 1e-13, epsrel: float = 1e-11) -> np.ndarray:
    """Noise kernel by direct Fourier quadrature (QUADPACK QAWF for s != 0)."""
    if theta < 0:
        raise DomainError(f"theta must be >= 0, got {theta}")
    if cutoff <= 0:
        raise DomainError(f"cutoff must be > 0, got {cutoff}")
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty_like(s_arr)
    scale = cutoff ** 2 + 2.0 * theta * cutoff
    f = lambda w: _spectral(w, theta, cutoff) / scale
    for i, si in enumerate(np.abs(s_arr)):
        if si == 0.0:
            val = integrate.quad(f, 0.0, np.inf, epsabs=epsabs, epsrel=epsrel, limit=400)[0]
        else:
            # finite head, then QAWF on the tail
            split = 40.0 * cutoff
            head = integrate.quad(f, 0.0, split, weight="cos", wvar=si,
                                  epsabs=epsabs, epsrel=epsrel, limit=2000)[0]
            tail = integrate.quad(lambda w: f(w + split), 0.0, np.inf, weight="cos",
                                  wvar=si, epsabs=epsabs, epsrel=epsrel, limlst=200)[0]
            # cos(si (w + split)) = cos(si w) cos(si split) - sin(si w) sin(si split)
            if abs(math.sin(si * split)) > 0:
                tail_s = integrate.quad(lambda w: f(w + split), 0.0, np.inf, weight="sin",
                                        wvar=si, epsabs=epsabs, epsrel=epsrel, limlst=200)[0]
            else:
                tail_s = 0.0
            val = head + tail * math.cos(si * split) - tail_s * math.sin(si * split)
        out[i] = val * scale
    out *= g / math.pi
    return out.reshape(np.shape(s)) if np.ndim(s) else out[0]


# -- kernel cache and quadrature weights ---------------------------------------


@dataclass(frozen=True)
class HatWeights:
    """Double-integral weights of K against piecewise-linear functions.

    ``w[d, a, b] = Int_0^h Int_0^h psi_a(x) psi_b(y) K(d h + x - y) dx dy`` with
    ``psi_0 = 1 - x/h``, ``psi_1 = x/h`` and ``d >= 0``; negative lags follow
    from ``w(-d)[a, b] = w(d)[b, a]``.
    """

    h: float
    w: np.ndarray

    @property
    def max_lag(self) -> int:
        return self.w.shape[0] - 1

    def lag(self, d: int) -> np.ndarray:
        return self.w[d] if d >= 0 else self.w[-d].T

    def toeplitz(self, n: int):
        """Dense ``(n, n)`` matrices ``T_ab[m, k] = w(m - k)[a, b]``."""
        if n - 1 > self.max_lag:
            raise ConfigError(f"need {n - 1} lags but only {self.max_lag} are cached")
        out = {}
        for a in range(2):
            for b in range(2):
                col = self.w[:n, a, b]
                row = self.w[:n, b, a]
                out[a, b] = toeplitz(col, row)
        return out


def _overlap(u: np.ndarray, h: float):
    """Overlap polynomials ``kappa_ab(u) = Int psi_a(x) psi_b(x - u) dx``."""
    lo = np.maximum(0.0, u)
    hi = np.minimum(h, h + u)
    # two-point Gauss is exact for the quadratic integrand
    r = 0.5 / math.sqrt(3.0)
    mid, half = 0.5 * (lo + hi), hi - lo
    out = np.zeros(u.shape + (2, 2))
    for x in (mid - r * half, mid + r * half):
        y = x - u
        pa = (1.0 - x / h, x / h)
        pb = (1.0 - y / h, y / h)
        for a in range(2):
            for b in range(2):
                out[..., a, b] += 0.5 * half * pa[a] * pb[b]
    return out


def hat_weights(kernel, h: float, max_lag: int, width: float, order: int = 16) -> HatWeights:
    """Build :class:`HatWeights` for ``kernel(s)`` on step ``h``.

    ``width`` is the narrowest structure of ``K`` (``1/cutoff``); the two lags
    touching ``s = 0`` are integrated on sub-intervals no longer than
    ``width/4``.
    """
    xg, wg = np.polynomial.legendre.leggauss(order)

    def nodes(edges):
        a, b = edges[:-1, None], edges[1:, None]
        u = 0.5 * (a + b) + 0.5 * (b - a) * xg[None, :]
        return u.ravel(), (0.5 * (b - a) * wg[None, :]).ravel()

    n_fine = max(2, int(math.ceil(h / (0.25 * width))))
    fine_edges = np.concatenate([np.linspace(-h, 0.0, n_fine + 1), np.linspace(0.0, h, n_fine + 1)[1:]])
    uf, wf = nodes(fine_edges)
    uc, wc = nodes(np.array([-h, 0.0, h]))
    kf, kc = _overlap(uf, h), _overlap(uc, h)

    w = np.empty((max_lag + 1, 2, 2))
    near = min(max_lag, 1)
    for d in range(near + 1):
        vals = kernel(d * h + uf) * wf
        w[d] = np.einsum("n,nab->ab", vals, kf)
    if max_lag >= 2:
        d = np.arange(2, max_lag + 1)
        vals = kernel(d[:, None] * h + uc[None, :]) * wc[None, :]
        w[2:] = np.einsum("dn,nab->dab", vals, kc)
    return HatWeights(h, w)


@dataclass
class NoiseKernelCache:
    """Sampled noise kernel on a uniform grid ``s_k = k * ds`` (``s >= 0``)."""

    theta: float
    cutoff: float
    g: float
    s_grid: np.ndarray
    values: np.ndarray
    method: str = "matsubara"
    max_deviation: float = 0.0
    _weights: dict = field(default_factory=dict, repr=False)

    def __call__(self, s):
        return kernel_series(np.abs(s), self.theta, self.cutoff, self.g)

    @property
    def step(self) -> float:
        return float(self.s_grid[1] - self.s_grid[0]) if self.s_grid.size > 1 else 0.0

    def weights(self, h: float, max_lag: int) -> HatWeights:
        key = (round(h, 15), max_lag)
        if key not in self._weights:
            self._weights[key] = hat_weights(self, h, max_lag, 1.0 / self.cutoff)
        return self._weights[key]


def compare_methods(theta: float, cutoff: float, s, g: float = 1.0):
    """Max deviation between quadrature and series, relative to ``|K| + 1e-9 K(0)``."""
    s = np.asarray(s, dtype=float)
    ks = kernel_series(s, theta, cutoff, g)
    kq = kernel_quadrature(s, theta, cutoff, g)
    k0 = float(kernel_series(0.0, theta, cutoff, g))
    rel = np.abs(kq - ks) / (np.abs(ks) + 1e-9 * abs(k0))
    return float(np.max(rel)), ks, kq


def noise_kernel(theta: float, cutoff: float, s_grid, g: float = 1.0,
                 check_points: int | None = 48) -> NoiseKernelCache:
    """Sample K on ``s_grid`` and cross-check series against quadrature.

    ``check_points`` limits the quadrature check to that many evenly spread
    grid points (``None`` checks every point).

    Raises
    ------
    KernelAccuracyError
        If the two evaluations differ by more than ``1e-5`` (relative).
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid < 0):
        raise DomainError("s_grid must be non-negative (K is even)")
    values = kernel_series(s_grid, theta, cutoff, g)
    dev = 0.0
    if check_points != 0 and s_grid.size:
        if check_points is None or check_points >= s_grid.size:
            idx = np.arange(s_grid.size)
        else:
            idx = np.unique(np.linspace(0, s_grid.size - 1, check_points).round().astype(int))
        dev, _, _ = compare_methods(theta, cutoff, s_grid[idx], g)
        if dev > KERNEL_FAIL_RTOL:
            raise KernelAccuracyError(
                f"noise kernel methods disagree by {dev:.2e} (theta={theta}, cutoff={cutoff})"
            )
    return NoiseKernelCache(theta, cutoff, g, s_grid, values, "matsubara", dev)


# -- influence coefficients ----------------------------------------------------


@dataclass(frozen=True)
class InfluenceCoefficients:
    """Influence-functional coefficients of one normal mode at time ``t``."""

    t: float
    a11: float
    a12: float
    a22: float
    b1: float = math.nan
    b2: float = math.nan
    b3: float = math.nan
    b4: float = math.nan

    @property
    def a21(self) -> float:
        return self.a12

    @property
    def normalization(self) -> float:
        return 2.0 * math.pi / self.b3


def _grid_stride(bsol: BoundarySolutions, h: float) -> int:
    ds = bsol.s[1] - bsol.s[0]
    stride = int(round(h / ds))
    if stride < 1 or abs(stride * ds - h) > 1e-9 * h:
        raise ConfigError(f"kernel step {h} is not a multiple of the solution grid step {ds}")
    n = (bsol.s.size - 1) / stride
    if abs(n - round(n)) > 1e-9:
        raise ConfigError("t_final is not on the kernel grid")
    return stride


def a_coefficients(bsol: BoundarySolutions, weights: HatWeights, swap: bool = False):
    """Double-integral coefficients ``a_ij = 1/2 Int Int v_i v_j K`` from scratch.

    ``v_i`` are interpolated linearly between kernel-grid points and integrated
    exactly against K through the hat weights. Returns ``(a11, a12, a22)``;
    with ``swap=True`` the off-diagonal term is evaluated as ``a21`` instead.
    """
    stride = _grid_stride(bsol, weights.h)
    v1 = bsol.v1[::stride]
    v2 = bsol.v2[::stride]
    n = v1.size - 1
    if n == 0:
        return 0.0, 0.0, 0.0
    tz = weights.toeplitz(n)

    def quad(x, y):
        acc = 0.0
        for a in range(2):
            for b in range(2):
                xa = x[a:a + n]
                yb = y[b:b + n]
                acc += xa @ tz[a, b] @ yb
        return 0.5 * acc

    a12 = quad(v2, v1) if swap else quad(v1, v2)
    return quad(v1, v1), a12, quad(v2, v2)


def b_coefficients(bsol: BoundarySolutions, g: float):
    """Endpoint coefficients ``b1..b4``; the normalization is ``2 pi / b3``."""
    b = (bsol.du1_0 + g, bsol.du1_t, bsol.du2_0, bsol.du2_t)
    if not np.all(np.isfinite(b)) or b[2] == 0.0:
        raise CausticError(bsol.t_final)
    return tuple(float(x) for x in b)


def noise_from_a(f1, df1, a11, a12, a22):
    """Noise contribution to ``(sxx, sxp, spp)`` built from ``a_ij``."""
    nxx = 2.0 * f1 * f1 * a11
    nxp = 2.0 * (f1 * df1 * a11 + f1 * a12)
    npp = 2.0 * (df1 * df1 * a11 + 2.0 * df1 * a12 + a22)
    return nxx, nxp, npp


def a_from_noise(f1, df1, nxx, nxp, npp):
    """Invert :func:`noise_from_a`; singular where ``f1`` vanishes."""
    a11 = nxx / (2.0 * f1 * f1)
    a12 = (0.5 * nxp - f1 * df1 * a11) / f1
    a22 = 0.5 * npp - df1 * df1 * a11 - 2.0 * df1 * a12
    return a11, a12, a22


# -- diffusion coefficients ----------------------------------------------------


@dataclass(frozen=True)
class DiffusionCoefficients:
    t: np.ndarray
    d_pp: np.ndarray
    d_px: np.ndarray
    variant: str

    @property
    def d_xp(self):
        return self.d_px


def diffusion_small_hbar(theta: float, g: float, omega2) -> DiffusionCoefficients:
    """High-temperature diffusion coefficients with ``Lambda = 1/(24 theta^2)``."""
    if theta <= 0:
        raise DomainError("small-hbar diffusion needs theta > 0")
    lam = 1.0 / (24.0 * theta * theta)
    omega2 = np.asarray(omega2, dtype=float)
    d_pp = g * theta + 2.0 * g * lam * theta * (omega2 - g * g)
    d_px = np.full_like(omega2, 2.0 * g * g * lam * theta)
    return DiffusionCoefficients(np.full_like(omega2, np.nan), d_pp, d_px, "small_hbar")


def diffusion_exact(t, nxx, nxp, npp, omega2, g: float) -> DiffusionCoefficients:
    """Time-local diffusion reproducing the exact noise covariance.

    The noise part ``N`` of the covariance satisfies
    ``N' = A N + N A^T + [[0, D_px], [D_px, 2 D_pp]]`` with the drift ``A`` of
    the damped mode; derivatives are centered differences on the uniform
    sample grid ``t`` (one-sided at the ends).
    """
    t = np.asarray(t, dtype=float)
    dxx, dxp, dpp = (np.gradient(np.asarray(v, dtype=float), t, edge_order=2) for v in (nxx, nxp, npp))
    omega2 = np.asarray(omega2, dtype=float)
    d_pp = 0.5 * (dpp + 2.0 * omega2 * nxp + 2.0 * g * npp)
    d_px = dxp - npp + omega2 * nxx + g * nxp
    return DiffusionCoefficients(t, d_pp, d_px, "exact")


def diffusion_from_coefficients(t, f1, df1, a11, a12, a22, omega2, g: float) -> DiffusionCoefficients:
    """Exact diffusion from sampled ``a_ij`` and the fundamental solution ``f1``."""
    return diffusion_exact(t, *noise_from_a(f1, df1, a11, a12, a22), omega2, g)

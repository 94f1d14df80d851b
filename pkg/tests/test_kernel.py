import math

import numpy as np
import pytest
from scipy import integrate

from hotent import kernel as kmod
from hotent.config import SystemConfig, omega_sq
from hotent.dynamics import _weights, evolve_full, evolve_mode
from hotent.errors import DomainError, KernelAccuracyError
from hotent.floquet import boundary_solutions, integrate_fundamentals
from hotent.gaussian import ModeCovariance, lab_to_normal, make_thermal_product
from hotent.kernel import (
    a_coefficients,
    a_from_noise,
    b_coefficients,
    compare_methods,
    diffusion_exact,
    diffusion_small_hbar,
    hat_weights,
    kernel_quadrature,
    kernel_series,
    noise_from_a,
    noise_kernel,
    trigamma,
)
from hotent.oracles import discretize_bath, evolve_closed
from reference import kernel_zero_temperature


def test_trigamma_known_values():
    assert trigamma(1.0).real == pytest.approx(math.pi ** 2 / 6, rel=1e-14)
    assert trigamma(0.5).real == pytest.approx(math.pi ** 2 / 2, rel=1e-14)
    # recurrence psi'(w) = psi'(w + 1) + 1/w^2 off the real axis
    w = 0.7 - 3.2j
    assert abs(trigamma(w) - trigamma(w + 1) - 1 / w ** 2) < 1e-13


def test_zero_temperature_closed_form():
    s = np.array([0.0, 0.003, 0.02, 0.3, 2.0, 17.0])
    ref = kernel_zero_temperature(s, 0.01, 50.0)
    np.testing.assert_allclose(kernel_series(s, 0.0, 50.0, 0.01), ref, rtol=1e-12)
    np.testing.assert_allclose(kernel_quadrature(s, 0.0, 50.0, 0.01), ref, rtol=1e-8,
                               atol=1e-12 * abs(ref[0]))
    # K(0) = g cutoff^2 / pi with the fluctuation-dissipation normalization
    assert kernel_series(0.0, 0.0, 50.0, 0.01) == pytest.approx(0.01 * 2500 / math.pi, rel=1e-14)


@pytest.mark.parametrize("theta", [0.0, 0.5, 1.0, 10.0, 300.0])
def test_dual_method_agreement(theta):
    s = np.concatenate([[0.0, 0.005, 0.02, 0.3], np.linspace(0.5, 30, 12)])
    dev, _, _ = compare_methods(theta, 50.0, s)
    assert dev <= 1e-6


def test_dual_method_spec_point():
    ks = kernel_series(0.3, 10.0, 50.0)
    kq = kernel_quadrature(0.3, 10.0, 50.0)
    assert abs(kq - ks) / abs(ks) < 1e-6


def test_kernel_even_and_finite():
    s = np.linspace(0, 5, 11)
    np.testing.assert_allclose(kernel_series(-s, 10.0, 50.0), kernel_series(s, 10.0, 50.0), rtol=1e-15)
    assert np.isfinite(kernel_series(0.0, 10.0, 50.0))


@pytest.mark.parametrize("theta", [10.0, 100.0])
def test_kernel_integral_is_classical_diffusion(theta):
    g = 0.01
    f = lambda s: kernel_series(s, theta, 50.0, g)
    head = integrate.quad(f, 0, 1, limit=400, points=[0.02, 0.1])[0]
    tail = integrate.quad(f, 1, 400, limit=400)[0]
    assert 2 * (head + tail) == pytest.approx(2 * g * theta, rel=2e-3)


def test_kernel_rejects_bad_arguments():
    with pytest.raises(DomainError):
        kernel_series(0.1, -1.0, 50.0)
    with pytest.raises(DomainError):
        kernel_series(0.1, 1.0, 0.0)
    with pytest.raises(DomainError):
        noise_kernel(1.0, 50.0, [-0.1, 0.0])


def test_noise_kernel_cache():
    cache = noise_kernel(10.0, 50.0, np.linspace(0, 3, 61), g=0.01)
    assert cache.max_deviation < 1e-6
    assert cache.step == pytest.approx(0.05)
    np.testing.assert_allclose(cache.values, kernel_series(cache.s_grid, 10.0, 50.0, 0.01))


def test_noise_kernel_flags_disagreement(monkeypatch):
    real = kmod.kernel_quadrature
    monkeypatch.setattr(kmod, "kernel_quadrature", lambda *a, **k: real(*a, **k) * (1 + 1e-4))
    with pytest.raises(KernelAccuracyError):
        noise_kernel(1.0, 50.0, np.linspace(0, 1, 5))


def test_hat_weights_against_double_quadrature():
    # smooth kernel with a narrow peak; oracle is a generic 2-d quadrature
    kern = lambda s: kernel_series(np.abs(s), 2.0, 5.0)
    h = 0.3
    hw = hat_weights(kern, h, 6, 1.0 / 5.0)
    psi = (lambda x: 1 - x / h, lambda x: x / h)
    for d in (0, 1, 4):
        for a in range(2):
            for b in range(2):
                ref = integrate.dblquad(lambda y, x: psi[a](x) * psi[b](y) * float(kern(d * h + x - y)),
                                        0, h, 0, h, epsabs=1e-13, epsrel=1e-11)[0]
                assert hw.w[d, a, b] == pytest.approx(ref, rel=1e-9, abs=1e-13)
    np.testing.assert_array_equal(hw.lag(-3), hw.w[3].T)


def _setup(config, horizon):
    fs = integrate_fundamentals(config, "+", horizon=horizon)
    h = config.grid_step
    max_lag = int(math.ceil(config.memory_time / h))
    w = _weights(float(config.theta), float(config.cutoff), float(config.g), h, max_lag)
    return fs, w


def test_a_vanish_at_start():
    cfg = SystemConfig(theta=1.0, g=0.01, kappa1=0.2)
    fs, w = _setup(cfg, 1)
    # a_ij shrink with the integration domain, bounded by t^2 K(0) / 2 since |v_i| <= 1
    vals = [np.abs(a_coefficients(boundary_solutions(fs, fs.t[k]), w)) for k in (256, 64, 16)]
    for big, small in zip(vals, vals[1:]):
        assert small[0] < 0.5 * big[0] and small[2] < 0.5 * big[2]
    t = fs.t[16]
    assert np.max(vals[-1]) <= 0.5 * t * t * kernel_series(0.0, 1.0, 50.0, 0.01)


def test_a12_symmetry_and_gram_positivity():
    cfg = SystemConfig(theta=1.0, g=0.01, kappa1=0.2, delta=1.996)
    fs, w = _setup(cfg, 3)
    for k in (160, 800, 2000, 3008):
        b = boundary_solutions(fs, fs.t[k])
        a11, a12, a22 = a_coefficients(b, w)
        _, a21, _ = a_coefficients(b, w, swap=True)
        assert abs(a12 - a21) <= 1e-12 * max(1.0, abs(a12))
        assert a11 >= 0 and a22 >= 0
        assert a11 * a22 >= a12 * a12 - 1e-9


def test_incremental_matches_scratch():
    # streaming noise recursion in the dynamics vs the double integral from scratch
    cfg = SystemConfig(theta=1.0, g=0.01, kappa1=0.2, delta=1.996, horizon=4)
    fs, w = _setup(cfg, 4)
    mt = evolve_mode(cfg, "+", ModeCovariance(0.5, 0.0, 0.5))
    infl = mt.influence()
    for i in (5, 17, 40, 77, 100):
        ref = np.array(a_coefficients(boundary_solutions(fs, mt.t[i]), w))
        assert mt.t[i] < cfg.memory_time
        np.testing.assert_allclose(infl[:, i], ref, rtol=1e-10, atol=1e-12 * np.abs(ref).max())


def test_noise_a_round_trip():
    f1, df1 = 0.7, -0.3
    a = (0.2, -0.05, 0.4)
    back = a_from_noise(f1, df1, *noise_from_a(f1, df1, *a))
    np.testing.assert_allclose(back, a, rtol=1e-14)


def test_a_from_discretized_bath():
    # invert the closed-system covariance at t ~ 5 for a_ij
    cfg = SystemConfig(theta=1.0, g=0.01, kappa1=0.0, delta=1.996, horizon=4)
    traj = evolve_full(cfg)
    i = traj.index(5.0)
    t = traj.t[i]
    bath = discretize_bath(cfg, 300, horizon=t)
    ref = evolve_closed(bath, cfg, make_thermal_product(1.0), [t])[0]
    plus, _, _ = lab_to_normal(ref)
    mode = traj.modes["+"]
    homogeneous = mode.covariance[i] - mode.noise[i]
    noise_ref = np.array([plus.sxx, plus.sxp, plus.spp]) - homogeneous
    f1, df1 = mode.phi[i, 0, 1], mode.phi[i, 1, 1]
    a_ref = np.array(a_from_noise(f1, df1, *noise_ref))
    np.testing.assert_allclose(mode.influence()[:, i], a_ref, rtol=1e-3)


def test_b_undriven_undamped():
    cfg = SystemConfig(kappa1=0.0, g=0.0, delta=1.0)
    fs = integrate_fundamentals(cfg, "+", horizon=1)
    t = fs.t[700]
    b = b_coefficients(boundary_solutions(fs, t), 0.0)
    cot = math.cos(t) / math.sin(t)
    ref = (-cot, -1 / math.sin(t), 1 / math.sin(t), cot)
    np.testing.assert_allclose(b, ref, rtol=1e-9)


def test_b_damped_closed_form():
    g = 0.05
    cfg = SystemConfig(kappa1=0.0, g=g, delta=1.0)
    fs = integrate_fundamentals(cfg, "+", horizon=1)
    t = fs.t[900]
    b = b_coefficients(boundary_solutions(fs, t), g)
    nu = math.sqrt(1 - g * g / 4)
    f1 = math.exp(-g * t / 2) * math.sin(nu * t) / nu
    f2 = math.exp(-g * t / 2) * (math.cos(nu * t) + g / (2 * nu) * math.sin(nu * t))
    assert b[0] - g == pytest.approx(-f2 / f1, rel=1e-9)
    assert b[2] == pytest.approx(1 / f1, rel=1e-9)


def test_small_hbar_diffusion_values():
    d = diffusion_small_hbar(10.0, 0.005, 1.0)
    lam = 1 / (24 * 100.0)
    assert float(d.d_pp) == pytest.approx(0.005 * 10 + 2 * 0.005 * lam * 10 * (1 - 0.005 ** 2), rel=1e-14)
    assert float(d.d_pp) == pytest.approx(0.050042, abs=1e-6)
    assert float(d.d_px) == pytest.approx(2.08e-7, rel=2e-3)
    with pytest.raises(DomainError):
        diffusion_small_hbar(0.0, 0.005, 1.0)


def test_exact_diffusion_reproduces_noise():
    # integrating N' = A N + N A^T + D with the recovered D must give N back
    cfg = SystemConfig(theta=5.0, g=0.01, kappa1=0.3, delta=1.996, horizon=6,
                       samples_per_period=128)
    mt = evolve_mode(cfg, "+", ModeCovariance(0.5, 0.0, 0.5))
    w2 = omega_sq(cfg, "+", mt.t)
    d = diffusion_exact(mt.t, *mt.noise.T, w2, cfg.g)
    nxx, nxp, npp = mt.noise.T
    dt = mt.t[1] - mt.t[0]
    rhs_xx = 2 * nxp
    np.testing.assert_allclose(np.gradient(nxx, dt, edge_order=2)[5:-5], rhs_xx[5:-5],
                               atol=2e-3 * np.abs(rhs_xx).max())
    assert np.all(np.isfinite(d.d_pp)) and np.all(np.isfinite(d.d_px))


def test_exact_vs_small_hbar_high_temperature():
    cfg = SystemConfig(theta=250.0, g=0.005, kappa1=0.0, horizon=100, samples_per_period=128)
    mt = evolve_mode(cfg, "+", ModeCovariance(0.5, 0.0, 0.5))
    d = diffusion_exact(mt.t, *mt.noise.T, omega_sq(cfg, "+", mt.t), cfg.g)
    ref = float(diffusion_small_hbar(250.0, 0.005, 1.0).d_pp)
    late = d.d_pp[mt.t.size // 2:].mean()
    assert abs(late / ref - 1) < 0.01

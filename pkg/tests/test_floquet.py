import math

import numpy as np
import pytest

from hotent.config import SystemConfig, omega_sq
from hotent.errors import CausticError, ConfigError
from hotent.floquet import boundary_solutions, floquet_exponent, integrate_fundamentals, monodromy
from reference import integrate_mode, mathieu_growth_fit


def test_omega_sq_undriven():
    cfg = SystemConfig(kappa0=0.0, kappa1=0.0)
    t = np.linspace(0, 10, 7)
    for mode in "+-":
        np.testing.assert_array_equal(omega_sq(cfg, mode, t), 1.0)


def test_omega_sq_coupling_drive():
    assert omega_sq(SystemConfig(kappa1=0.5), "+", 0.0) == pytest.approx(1.5)


def test_omega_sq_frequency_drive():
    cfg = SystemConfig(drive_kind="frequency", omega1=0.1, kappa0=0.047, kappa1=0.0, delta=2.0)
    t = (math.pi / 2) / cfg.delta
    assert omega_sq(cfg, "-", t) == pytest.approx(1.1 ** 2 - 0.047, rel=1e-14)
    assert 1.1 ** 2 - 0.047 == pytest.approx(1.163)


def test_undriven_fundamentals_are_sin_cos():
    cfg = SystemConfig(kappa1=0.0, g=0.0, delta=1.0)
    fs = integrate_fundamentals(cfg, "+", horizon=3)
    assert np.max(np.abs(fs.f1 - np.sin(fs.t))) < 1e-8
    assert np.max(np.abs(fs.f2 - np.cos(fs.t))) < 1e-8
    assert np.max(np.abs(fs.df1 - np.cos(fs.t))) < 1e-8


def test_damped_fundamentals_closed_form():
    g = 0.1
    cfg = SystemConfig(kappa1=0.0, g=g, delta=1.0)
    fs = integrate_fundamentals(cfg, "-", horizon=3)
    nu = math.sqrt(1 - g * g / 4)
    ref = np.exp(-g * fs.t / 2) * np.sin(nu * fs.t) / nu
    assert np.max(np.abs(fs.f1 - ref)) < 1e-8
    # anti-damped partner
    ref_g = np.exp(g * fs.t / 2) * np.sin(nu * fs.t) / nu
    assert np.max(np.abs(fs.g1 - ref_g) / np.maximum(1, np.abs(ref_g))) < 1e-8


def test_fundamentals_match_generic_solver():
    cfg = SystemConfig(kappa1=0.5, delta=1.996, g=0.01)
    fs = integrate_fundamentals(cfg, "+", horizon=5, stride=64)
    ref = integrate_mode(lambda t: float(omega_sq(cfg, "+", t)), cfg.g, [0.0, 1.0], fs.t)
    np.testing.assert_allclose(fs.f1, ref[0], atol=1e-8 * np.abs(ref[0]).max())


def test_wronskian_constant():
    cfg = SystemConfig(kappa1=0.5, delta=1.996, g=0.01)
    fs = integrate_fundamentals(cfg, "+", horizon=20)
    assert np.max(np.abs(fs.wronskian() - 1.0)) < 1e-8


def test_growth_rate_matches_fit():
    # oracle first: fit ln|x| of a generic ODE solution over 120 periods
    fit, _ = mathieu_growth_fit(0.5, 1.996, periods=120)
    fe = floquet_exponent(SystemConfig(kappa1=0.5, delta=1.996), "+")
    assert fe.growth_rate == pytest.approx(fit, rel=0.02)
    assert not fe.stable
    assert fe.mu.imag == pytest.approx(fe.growth_rate, rel=1e-9)


def test_undriven_is_stable():
    cfg = SystemConfig(kappa1=0.0, delta=1.996)
    fe = floquet_exponent(cfg, "+")
    assert fe.stable and fe.growth_rate == 0.0
    # the mode frequency, folded into [0, delta/2]
    folded = min(1.0 % cfg.delta, cfg.delta - 1.0 % cfg.delta)
    assert fe.mu.real == pytest.approx(folded, abs=1e-9)


def test_outside_tongue_stable():
    _, sol = mathieu_growth_fit(0.05, 3.0, periods=500)
    assert np.max(np.hypot(sol.y[0], sol.y[1])) < 10.0
    assert floquet_exponent(SystemConfig(kappa1=0.05, delta=3.0), "+").stable


@pytest.mark.parametrize("kappa1, delta", [(0.5, 1.996), (0.2, 1.9996), (0.3, 1.5)])
def test_monodromy_unimodular(kappa1, delta):
    m = monodromy(SystemConfig(kappa1=kappa1, delta=delta), "-")
    assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-9)


def test_growth_rate_mode_symmetry():
    cfg = SystemConfig(kappa1=0.3, delta=1.99)
    gp = floquet_exponent(cfg, "+").growth_rate
    gm = floquet_exponent(cfg, "-").growth_rate
    gm_flip = floquet_exponent(cfg.replace(kappa1=-0.3), "-").growth_rate
    assert gp == pytest.approx(gm, rel=1e-9)
    assert gp == pytest.approx(gm_flip, rel=1e-12)


def test_boundary_solutions_closed_form():
    cfg = SystemConfig(kappa1=0.0, g=0.0, delta=1.0)
    fs = integrate_fundamentals(cfg, "+", horizon=1)
    b = boundary_solutions(fs, math.pi / 2)
    assert np.max(np.abs(b.v1 - np.cos(b.s))) < 1e-9
    assert np.max(np.abs(b.v2 - np.sin(b.s))) < 1e-9


def test_boundary_values():
    cfg = SystemConfig(kappa1=0.5, delta=1.996, g=0.01)
    fs = integrate_fundamentals(cfg, "+", horizon=3)
    t = fs.t[3000]
    b = boundary_solutions(fs, t)
    for start, end, arr in ((1, 0, b.v1), (0, 1, b.v2), (1, 0, b.u1), (0, 1, b.u2)):
        assert arr[0] == pytest.approx(start, abs=1e-9)
        assert arr[-1] == pytest.approx(end, abs=1e-9)


def test_boundary_solutions_reintegration():
    cfg = SystemConfig(kappa1=0.2, delta=1.9996, g=0.001)
    fs = integrate_fundamentals(cfg, "+", horizon=10)
    t_final = 10 * cfg.period
    b = boundary_solutions(fs, fs.t[fs.index(t_final)])
    s = b.s[::32]
    w2 = lambda t: float(omega_sq(cfg, "+", t))
    # u solve the damped equation, v the anti-damped one; start from the endpoint data
    u1 = integrate_mode(w2, cfg.g, [1.0, b.du1_0], s)[0]
    v2 = integrate_mode(w2, -cfg.g, [0.0, b.dv2[0]], s)[0]
    assert np.max(np.abs(u1 - b.u1[::32])) < 1e-7
    assert np.max(np.abs(v2 - b.v2[::32])) < 1e-7


def test_caustic_reported():
    cfg = SystemConfig(kappa1=0.0, g=0.0, delta=1.0)
    fs = integrate_fundamentals(cfg, "+", horizon=1)
    with pytest.raises(CausticError, match="t_final"):
        boundary_solutions(fs, math.pi)


def test_off_grid_time_rejected():
    cfg = SystemConfig(kappa1=0.0, g=0.0, delta=1.0)
    fs = integrate_fundamentals(cfg, "+", horizon=1)
    with pytest.raises(ConfigError):
        boundary_solutions(fs, 0.1234567)

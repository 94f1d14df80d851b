import math

import pytest
from scipy import constants

from hotent.errors import ConfigError
from hotent.units import UnitContext, convert, kelvin_to_theta, position_spread_m, theta_to_kelvin


def test_theta_kelvin_round_trip():
    ctx = UnitContext(frequency=21e9)
    k = theta_to_kelvin(1.0, ctx)
    assert k == pytest.approx(constants.h * 21e9 / constants.k, rel=1e-15)
    assert k == pytest.approx(1.00784, rel=1e-5)
    assert kelvin_to_theta(k, ctx) == pytest.approx(1.0, rel=1e-15)
    assert theta_to_kelvin(50.0, ctx) == pytest.approx(50.392, rel=1e-4)


def test_length_scale_and_spread():
    ctx = UnitContext(frequency=1e6, mass=1e-25)
    ref = math.sqrt(constants.hbar / (1e-25 * 2 * math.pi * 1e6))
    assert ctx.length_scale == pytest.approx(ref, rel=1e-15)
    assert position_spread_m(4.0, ctx) == pytest.approx(2 * ref)


def test_missing_and_invalid_fields():
    with pytest.raises(ConfigError, match="missing unit field"):
        UnitContext(frequency=1e6).length_scale
    with pytest.raises(ConfigError):
        UnitContext(frequency=-1.0)
    with pytest.raises(ConfigError):
        theta_to_kelvin(-1.0, UnitContext(frequency=1e6))
    with pytest.raises(ConfigError):
        convert(UnitContext(frequency=1e6), theta=1.0, temperature=1.0)


def test_convert_trap_margin():
    ctx = UnitContext(frequency=1e6, mass=1e-25, trap_size=1e-6)
    out = convert(ctx, theta=10.0)
    assert out["temperature_k"] == pytest.approx(10 * ctx.quantum_kelvin)
    spread = math.sqrt(0.5 / math.tanh(0.05)) * ctx.length_scale
    assert out["position_spread_m"] == pytest.approx(spread, rel=1e-12)
    assert out["trap_margin"] == pytest.approx(1e-6 / spread, rel=1e-12)

"""Conversion between the dimensionless model and laboratory units.

The oscillator frequency is given as an ordinary frequency ``nu`` in Hz, so
that one quantum is ``h nu`` and the angular frequency is ``2 pi nu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy import constants

from .errors import ConfigError
from .gaussian import thermal_variance


@dataclass(frozen=True)
class UnitContext:
    """Physical scales; only ``frequency`` is needed for temperatures.

    Attributes
    ----------
    frequency : nu in Hz
    mass : oscillator mass in kg
    trap_size : spatial extent of the trap in m
    """

    frequency: Optional[float] = None
    mass: Optional[float] = None
    trap_size: Optional[float] = None

    def __post_init__(self):
        for name in ("frequency", "mass", "trap_size"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name}: must be positive (got {v})")

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"missing unit field(s): {', '.join(missing)}")

    @property
    def quantum_kelvin(self) -> float:
        """h nu / k_B."""
        self.require("frequency")
        return constants.h * self.frequency / constants.k

    @property
    def length_scale(self) -> float:
        """sqrt(hbar / (m omega)) in metres; natural position unit."""
        self.require("frequency", "mass")
        return math.sqrt(constants.hbar / (self.mass * 2.0 * math.pi * self.frequency))


def theta_to_kelvin(theta: float, ctx: UnitContext) -> float:
    if theta < 0:
        raise ConfigError(f"theta: must be >= 0 (got {theta})")
    return theta * ctx.quantum_kelvin


def kelvin_to_theta(temperature: float, ctx: UnitContext) -> float:
    if temperature < 0:
        raise ConfigError(f"temperature: must be >= 0 (got {temperature})")
    return temperature / ctx.quantum_kelvin


def position_spread_m(variance: float, ctx: UnitContext) -> float:
    """Standard deviation in metres of a position with dimensionless ``variance``."""
    if variance < 0:
        raise ConfigError(f"variance: must be >= 0 (got {variance})")
    return math.sqrt(variance) * ctx.length_scale


def convert(ctx: UnitContext, theta: Optional[float] = None,
            temperature: Optional[float] = None) -> dict:
    """Full conversion record for one temperature, given as ``theta`` or in kelvin."""
    if (theta is None) == (temperature is None):
        raise ConfigError("give exactly one of theta or temperature")
    ctx.require("frequency")
    if theta is None:
        theta = kelvin_to_theta(temperature, ctx)
    else:
        temperature = theta_to_kelvin(theta, ctx)
    out = {
        "frequency_hz": ctx.frequency,
        "theta": theta,
        "temperature_k": temperature,
        "quantum_k": ctx.quantum_kelvin,
    }
    if ctx.mass is not None:
        var = thermal_variance(theta)
        out["mass_kg"] = ctx.mass
        out["length_scale_m"] = ctx.length_scale
        out["position_spread_m"] = position_spread_m(var, ctx)
        if ctx.trap_size is not None:
            out["trap_size_m"] = ctx.trap_size
            # how many thermal standard deviations fit in the trap
            out["trap_margin"] = ctx.trap_size / out["position_spread_m"]
    elif ctx.trap_size is not None:
        raise ConfigError("trap_size needs mass for the position spread")
    return out

"""System parameters in natural units (hbar = m = omega = 1) and their text format.

The on-disk format is a flat ``key = value`` file whose keys are exactly the
field names of :class:`SystemConfig`. Blank lines and ``#`` comments are
ignored; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError

DRIVE_KINDS = ("coupling", "frequency")
MODES = ("+", "-")


@dataclass(frozen=True)
class SystemConfig:
    """Dimensionless parameters of the driven two-oscillator model.

    Attributes
    ----------
    theta : kT / (hbar omega)
    g : gamma / omega, damping of each bath
    kappa0, kappa1 : static and modulated coupling, c0/(m omega^2), c1/(m omega^2)
    delta : omega_d / omega
    cutoff : omega_c / omega, exponential cutoff of the bath spectrum
    drive_kind : ``"coupling"`` modulates c(t); ``"frequency"`` modulates
        omega(t) = 1 + omega1 sin(delta t) at fixed coupling kappa0
    omega1 : frequency modulation depth (frequency drive only)
    time_step : integrator step as a fraction of the drive period
    horizon : simulated drive periods
    samples_per_period : covariance samples per drive period
    grid_per_period : noise-quadrature grid points per drive period
    memory_time : truncation of the noise-kernel memory (natural time units)
    """

    theta: float = 10.0
    g: float = 0.01
    kappa0: float = 0.0
    kappa1: float = 0.5
    delta: float = 1.996
    cutoff: float = 50.0
    drive_kind: str = "coupling"
    omega1: float = 0.0
    time_step: float = 1.0 / 2048
    horizon: float = 50.0
    samples_per_period: int = 32
    grid_per_period: int = 128
    memory_time: float = 30.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"{name}: {why} (got {getattr(self, name)!r})")

        for name in ("theta", "g", "kappa0", "kappa1", "delta", "cutoff", "omega1",
                     "time_step", "horizon", "memory_time"):
            if not math.isfinite(float(getattr(self, name))):
                bad(name, "must be finite")
        if self.theta < 0:
            bad("theta", "must be >= 0")
        if self.g < 0:
            bad("g", "must be >= 0")
        if self.cutoff <= 0:
            bad("cutoff", "must be > 0")
        if self.delta <= 0:
            bad("delta", "must be > 0")
        if self.drive_kind not in DRIVE_KINDS:
            bad("drive_kind", f"must be one of {DRIVE_KINDS}")
        if not 0 < self.time_step <= 1.0 / 16:
            bad("time_step", "must lie in (0, 1/16]")
        if self.horizon <= 0:
            bad("horizon", "must be > 0")
        if self.memory_time <= 0:
            bad("memory_time", "must be > 0")
        if self.samples_per_period < 1:
            bad("samples_per_period", "must be >= 1")
        if self.grid_per_period % self.samples_per_period:
            bad("grid_per_period", "must be a multiple of samples_per_period")
        fine = 1.0 / self.time_step
        if abs(fine - round(fine)) > 1e-9 or round(fine) % self.grid_per_period:
            bad("time_step", "1/time_step must be an integer multiple of grid_per_period")

    # -- derived quantities --------------------------------------------------

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.delta

    @property
    def steps_per_period(self) -> int:
        return int(round(1.0 / self.time_step))

    @property
    def grid_step(self) -> float:
        return self.period / self.grid_per_period

    @property
    def is_driven(self) -> bool:
        if self.drive_kind == "frequency":
            return self.omega1 != 0.0
        return self.kappa1 != 0.0

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SystemConfig)}


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"{key}: unknown configuration key")
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind in ("float", float):
            if "/" in raw:
                num, den = raw.split("/", 1)
                return float(num) / float(den)
            return float(raw)
        if kind in ("int", int):
            return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_assignments(items: Iterable[str]) -> dict:
    """Parse ``key=value`` strings into typed field values."""
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"{item.strip()}: expected key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        out[key] = _coerce(key, raw)
    return out


def parse_config_text(text: str) -> dict:
    items = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            items.append(line)
    return parse_assignments(items)


def load_config(path: str | Path | None = None, overrides: Iterable[str] = (),
                base: Mapping | None = None) -> SystemConfig:
    """Build a config from an optional file plus ``key=value`` overrides.

    A ``.json`` file is accepted too: either a flat object or a summary
    document with the resolved config under ``"config"``.
    """
    values = dict(base or {})
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
        if path.suffix == ".json":
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config: {path} is not valid JSON ({exc})") from None
            doc = doc.get("config", doc)
            values.update(parse_assignments(f"{k}={v}" for k, v in doc.items()))
        else:
            values.update(parse_config_text(text))
    values.update(parse_assignments(overrides))
    return SystemConfig(**values)


def omega_sq(config: SystemConfig, mode: str, t):
    """Squared normal-mode frequency Omega_{+/-}^2(t).

    Coupling drive: ``1 +/- (kappa0 + kappa1 cos(delta t))``.
    Frequency drive: ``(1 + omega1 sin(delta t))^2 +/- kappa0``.
    """
    if mode not in MODES:
        raise ConfigError(f"mode: must be '+' or '-' (got {mode!r})")
    sign = 1.0 if mode == "+" else -1.0
    t = np.asarray(t, dtype=float)
    if config.drive_kind == "frequency":
        w = 1.0 + config.omega1 * np.sin(config.delta * t)
        return w * w + sign * config.kappa0
    return 1.0 + sign * (config.kappa0 + config.kappa1 * np.cos(config.delta * t))

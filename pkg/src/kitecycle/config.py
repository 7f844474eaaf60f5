"""Flat key = value configuration files with dotted section prefixes.

Example::

    # 50 kW demonstrator, nominal wind
    kite.glide_ratio   = 5.0
    kite.steering_gain = 0.05
    kite.area          = 21.0
    wind.speed         = 10.0
    wind.gust_profile  = 0:10, 60:13, 120:10   # optional breakpoints t:v_w
    sim.duration       = 600.0

Unknown keys are rejected (typo protection) and every parse error carries
the offending line and field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .control import CrosstermMode, InnerLoopConfig, OuterLoopConfig
from .errors import ConfigError
from .guidance import CycleConfig
from .model import KiteParams, WindCondition
from .optimizer import OptimizerConstraints
from .winch import WinchConfig


@dataclass(frozen=True)
class GustProfile:
    """Deterministic wind profile: linear interpolation between breakpoints."""

    times: tuple
    speeds: tuple

    def wind_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.speeds))


@dataclass
class NoiseConfig:
    """Optional additive Gaussian measurement noise (ideal sensors when zero)."""

    seed: int = 0
    angle_std: float = 0.0      # phi_m, theta_m, psi_m [rad]
    rate_std: float = 0.0       # psi_dot_m' [rad/s]
    airspeed_std: float = 0.0   # v_a as seen by the controllers [m/s]

    @property
    def enabled(self) -> bool:
        return self.angle_std > 0 or self.rate_std > 0 or self.airspeed_std > 0


@dataclass
class SimConfig:
    """Complete closed-loop simulation configuration."""

    params: KiteParams
    wind: WindCondition
    gust: Optional[GustProfile] = None
    cycle: CycleConfig = field(default_factory=CycleConfig)
    winch: WinchConfig = field(default_factory=WinchConfig)
    inner_loop: InnerLoopConfig = field(default_factory=InnerLoopConfig)
    outer_loop: OuterLoopConfig = field(default_factory=OuterLoopConfig)
    optimizer: OptimizerConstraints = field(default_factory=OptimizerConstraints)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    dt: float = 0.02
    duration: float = 600.0
    phi0: float = -0.3
    theta0: float = 0.9
    psi0: Optional[float] = None   # default: aligned with the initial set value
    l0: float = 200.0

    def __post_init__(self):
        if not (0.0 < self.dt <= 0.1):
            raise ConfigError("dt must lie in (0, 0.1] s", field="sim.dt")
        if self.duration <= 0:
            raise ConfigError("duration must be positive", field="sim.duration")


def _parse_lines(text: str) -> dict[str, tuple[str, int]]:
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key in entries:
            raise ConfigError("duplicate key", field=key, line=lineno)
        entries[key] = (value, lineno)
    return entries


class _Reader:
    """Typed access to parsed entries, tracking consumption for typo checks."""

    def __init__(self, entries: dict[str, tuple[str, int]]):
        self.entries = entries
        self.used: set[str] = set()

    def _raw(self, key: str):
        self.used.add(key)
        return self.entries.get(key)

    def has(self, key: str) -> bool:
        return key in self.entries

    def require_float(self, key: str) -> float:
        item = self._raw(key)
        if item is None:
            raise ConfigError("required field missing", field=key)
        return self._to_float(key, *item)

    def get_float(self, key: str, default: float) -> float:
        item = self._raw(key)
        if item is None:
            return default
        return self._to_float(key, *item)

    def get_int(self, key: str, default: int) -> int:
        item = self._raw(key)
        if item is None:
            return default
        value, lineno = item
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"expected integer, got '{value}'", field=key, line=lineno)

    def get_bool(self, key: str, default: bool) -> bool:
        item = self._raw(key)
        if item is None:
            return default
        value, lineno = item
        low = value.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"expected boolean, got '{value}'", field=key, line=lineno)

    def get_str(self, key: str, default: str) -> str:
        item = self._raw(key)
        return default if item is None else item[0]

    def get_optional_float(self, key: str):
        item = self._raw(key)
        return None if item is None else self._to_float(key, *item)

    def get_breakpoints(self, key: str):
        item = self._raw(key)
        if item is None:
            return None
        value, lineno = item
        times, speeds = [], []
        for chunk in value.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            if ":" not in chunk:
                raise ConfigError(f"expected 't:v' breakpoint, got '{chunk}'", field=key, line=lineno)
            t_s, v_s = chunk.split(":", 1)
            try:
                times.append(float(t_s))
                speeds.append(float(v_s))
            except ValueError:
                raise ConfigError(f"malformed breakpoint '{chunk}'", field=key, line=lineno)
        if len(times) < 2:
            raise ConfigError("gust profile needs at least two breakpoints", field=key, line=lineno)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("breakpoint times must be strictly increasing", field=key, line=lineno)
        return GustProfile(times=tuple(times), speeds=tuple(speeds))

    @staticmethod
    def _to_float(key: str, value: str, lineno: int) -> float:
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"expected number, got '{value}'", field=key, line=lineno)

    def reject_unknown(self):
        unknown = set(self.entries) - self.used
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError("unknown field", field=key, line=self.entries[key][1])


def load_config(path) -> SimConfig:
    """Load and validate a simulation config file."""
    text = Path(path).read_text()
    return parse_config(text)


def parse_config(text: str) -> SimConfig:
    r = _Reader(_parse_lines(text))

    try:
        params = KiteParams(
            glide_ratio=r.require_float("kite.glide_ratio"),
            steering_gain=r.require_float("kite.steering_gain"),
            area=r.require_float("kite.area"),
            air_density=r.get_float("kite.air_density", 1.2),
            force_coefficient=r.get_float("kite.force_coefficient", 1.0),
            gravity_turn_param=r.get_float("kite.gravity_turn_param", 0.0),
            v_a_min=r.get_float("kite.v_a_min", 5.0),
            deflection_limit=r.get_float("actuator.deflection_limit", 0.4),
            deflection_rate_limit=r.get_float("actuator.rate_limit", 0.8),
        )
        wind = WindCondition(v_w=r.require_float("wind.speed"))
        gust = r.get_breakpoints("wind.gust_profile")

        cycle = CycleConfig(
            phi_tp1=r.get_float("cycle.phi_tp1", 0.6),
            theta_tp1=r.get_float("cycle.theta_tp1", 1.0),
            sigma=r.get_float("cycle.sigma", 0.15),
            l_transfer=r.get_float("cycle.l_transfer", 270.0),
            l_restart=r.get_float("cycle.l_restart", 130.0),
            delta_theta_tp3=r.get_float("cycle.delta_theta_tp3", 0.3),
            phi_tp3=r.get_float("cycle.phi_tp3", 0.4),
            theta_return_boundary=r.get_float("cycle.theta_return_boundary", 1.05),
            theta_restart_exit=r.get_float("cycle.theta_restart_exit", 0.95),
        )
        winch = WinchConfig(
            a=r.get_float("winch.a", 3.5),
            theta0=r.get_float("winch.theta0", 1.05),
            a_lower=r.get_float("winch.a_lower", -0.55),
            a_upper=r.get_float("winch.a_upper", -0.65),
            alpha_limit_in=r.get_float("winch.alpha_limit_in", -0.5),
            alpha_limit_out=r.get_float("winch.alpha_limit_out", 0.3),
            v_min_restart_factor=r.get_float("winch.v_min_restart_factor", 1.5),
            l_dot_max=r.get_float("winch.l_dot_max", 6.0),
            l_ddot_max=r.get_float("winch.l_ddot_max", 3.0),
            tau=r.get_float("winch.tau", 0.1),
            lowpass_tau=r.get_float("winch.lowpass_tau", 0.05),
            f_max=r.get_float("winch.f_max", 25e3),
            force_relief_gain=r.get_float("winch.force_relief_gain", 5e-4),
        )
        inner = InnerLoopConfig(
            kp=r.get_float("inner_loop.kp", 0.5),
            ki=r.get_float("inner_loop.ki", 0.2),
            lowpass_tau=r.get_float("inner_loop.lowpass_tau", 0.1),
            error_limit=r.get_float("inner_loop.error_limit", 0.5),
            gravity_enabled=r.get_bool("inner_loop.gravity_enabled", False),
        )
        mode_str = r.get_str("outer_loop.mode", CrosstermMode.TARGET_POINT.value)
        try:
            mode = CrosstermMode(mode_str)
        except ValueError:
            raise ConfigError(
                f"mode must be one of {[m.value for m in CrosstermMode]}, got '{mode_str}'",
                field="outer_loop.mode",
            )
        outer = OuterLoopConfig(
            kp=r.get_float("outer_loop.kp", 0.8),
            lowpass_tau=r.get_float("outer_loop.lowpass_tau", 0.2),
            error_limit=r.get_float("outer_loop.error_limit", 1.0),
            mode=mode,
        )
        optimizer = OptimizerConstraints(
            l_min=r.get_float("optimizer.l_min", 130.0),
            l_max=r.get_float("optimizer.l_max", 270.0),
            psi_max=r.get_float("optimizer.psi_max", 1.42),
            alpha_limit_in=r.get_float("optimizer.alpha_limit_in", winch.alpha_limit_in),
            alpha_limit_out=r.get_float("optimizer.alpha_limit_out", winch.alpha_limit_out),
            theta_min=r.get_float("optimizer.theta_min", 0.05),
            theta_max=r.get_float("optimizer.theta_max", 3.0),
            t_min=r.get_float("optimizer.t_min", 40.0),
            t_max=r.get_float("optimizer.t_max", 250.0),
        )
        noise = NoiseConfig(
            seed=r.get_int("noise.seed", 0),
            angle_std=r.get_float("noise.angle_std", 0.0),
            rate_std=r.get_float("noise.rate_std", 0.0),
            airspeed_std=r.get_float("noise.airspeed_std", 0.0),
        )
        cfg = SimConfig(
            params=params,
            wind=wind,
            gust=gust,
            cycle=cycle,
            winch=winch,
            inner_loop=inner,
            outer_loop=outer,
            optimizer=optimizer,
            noise=noise,
            dt=r.get_float("sim.dt", 0.02),
            duration=r.get_float("sim.duration", 600.0),
            phi0=r.get_float("sim.phi0", -0.3),
            theta0=r.get_float("sim.theta0", 0.9),
            psi0=r.get_optional_float("sim.psi0"),
            l0=r.get_float("sim.l0", 200.0),
        )
    except ValueError as exc:
        # dataclass invariant violations surface as config errors
        raise ConfigError(str(exc)) from exc
    r.reject_unknown()
    return cfg

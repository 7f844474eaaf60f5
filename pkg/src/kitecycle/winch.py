"""Winch speed set-value laws per cycle phase, plus the winch actuator model.

Power phase: a proportional feedback of the measured air path speed whose
closed loop with the wind relation settles on reeling out at 1/a of the
projected wind speed.  Transfer and return: a saturated linear map of the
wind-window angle, scaled by the wind speed.  Restart: the transfer law with
an airspeed floor so the re-entry dive stays controllable.  A force-limit
override emulates the fast current-limit of the generator's frequency
converter by biasing the command toward reel-out.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .control import LowPass, clamp
from .model import KiteParams


@dataclass(frozen=True)
class WinchConfig:
    """Winch set-value law constants and actuator limits.

    The transfer law pivots at ``theta0`` with slope ``a_lower`` on the
    reel-out side (theta < theta0) and ``a_upper`` on the reel-in side,
    saturated at the normalized speeds ``alpha_limit_in``/``alpha_limit_out``;
    alpha_limit_in = -0.5 caps the return-phase window angle near 1.9 rad.
    """

    a: float = 3.5                      # power-phase reel-out factor
    theta0: float = 1.05                # transfer-law pivot [rad]
    a_lower: float = -0.55              # slope below the pivot [1/rad]
    a_upper: float = -0.65              # slope above the pivot [1/rad]
    alpha_limit_in: float = -0.5        # normalized reel-in limit
    alpha_limit_out: float = 0.3        # normalized reel-out limit
    v_min_restart_factor: float = 1.5   # restart airspeed floor, in units of v_w
    l_dot_max: float = 6.0              # winch speed limit [m/s]
    l_ddot_max: float = 3.0             # winch acceleration limit [m/s^2]
    tau: float = 0.1                    # command delay [s]
    lowpass_tau: float = 0.05           # drive low-pass time constant [s]
    f_max: float = 25e3                 # tether force limit [N]
    force_relief_gain: float = 5e-4     # reel-out bias per N above f_max [(m/s)/N]

    def __post_init__(self):
        if not (self.alpha_limit_in < 0.0 < self.alpha_limit_out):
            raise ValueError("alpha limits must straddle zero")
        if self.a <= 1.0:
            raise ValueError("reel-out factor a must exceed 1")
        if self.l_dot_max <= 0 or self.l_ddot_max <= 0:
            raise ValueError("winch limits must be positive")


def power_phase_speed(v_a: float, cfg: WinchConfig, params: KiteParams) -> float:
    """Power-phase set value: l_dot_s = v_a / ((a - 1) E).

    Closing this proportional loop through the wind relation converges on
    l_dot = v_w' cos(theta) / a, generalizing the reel-out-at-a-third thumb
    rule; gusts on the local wind are anticipated because v_a reacts first.
    """
    return v_a / ((cfg.a - 1.0) * params.glide_ratio)


def transfer_return_speed(theta_m: float, v_w: float, cfg: WinchConfig) -> float:
    """Saturated linear winch law for transfer and return phases.

    v_winch = v_w * clamp(slope * (theta_m - theta0), alpha_in, alpha_out),
    with the reel-out slope below the pivot and the reel-in slope above it.
    Positive output in the early transfer keeps harvesting the remaining
    high forces; deep window angles saturate at the reel-in limit.
    """
    slope = cfg.a_lower if theta_m <= cfg.theta0 else cfg.a_upper
    alpha = clamp(slope * (theta_m - cfg.theta0), cfg.alpha_limit_in, cfg.alpha_limit_out)
    return v_w * alpha


def restart_speed(theta_m: float, v_w: float, cfg: WinchConfig, params: KiteParams) -> float:
    """Restart set value: transfer law with an airspeed floor.

    Keeping l_dot at or below ``v_w cos(theta) - v_min/E`` holds
    v_a >= v_min_restart through the re-entry dive:

        v_winch = min(transfer_return_speed, v_w cos(theta_m) - v_min / E)
    """
    v_min = cfg.v_min_restart_factor * v_w
    bound = v_w * math.cos(theta_m) - v_min / params.glide_ratio
    return min(transfer_return_speed(theta_m, v_w, cfg), bound)


def force_limit_override(f: float, l_dot_cmd: float, cfg: WinchConfig) -> float:
    """Fast-depower emulation: bias toward reel-out above the force limit.

    Below f_max the command passes through; above it, reel-out speed grows
    proportionally to the excess force, capped at the winch speed limit.
    """
    if f <= cfg.f_max:
        return l_dot_cmd
    return min(l_dot_cmd + cfg.force_relief_gain * (f - cfg.f_max), cfg.l_dot_max)


class WinchActuator:
    """Winch drive model: command delay, low-pass, acceleration and speed limits."""

    def __init__(self, cfg: WinchConfig, dt: float):
        self.cfg = cfg
        self.dt = dt
        delay_steps = int(round(cfg.tau / dt))
        self._queue = deque([0.0] * delay_steps, maxlen=delay_steps) if delay_steps else None
        self._lowpass = LowPass(cfg.lowpass_tau)
        self.l_dot = 0.0

    def reset(self, l_dot0: float = 0.0):
        """Reset to a steady state at speed ``l_dot0`` (queue and filter pre-filled)."""
        if self._queue is not None:
            n = self._queue.maxlen
            self._queue = deque([l_dot0] * n, maxlen=n)
        self._lowpass.reset(l_dot0)
        self.l_dot = l_dot0

    def step(self, command: float) -> float:
        """Advance one sample; returns the realized tether speed."""
        if self._queue is not None:
            delayed = self._queue[0]
            self._queue.append(command)
            command = delayed
        smoothed = self._lowpass.step(command, self.dt)
        limited = clamp(smoothed, -self.cfg.l_dot_max, self.cfg.l_dot_max)
        step = clamp(limited - self.l_dot, -self.cfg.l_ddot_max * self.dt, self.cfg.l_ddot_max * self.dt)
        self.l_dot += step
        return self.l_dot

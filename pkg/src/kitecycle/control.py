"""Cascaded flight controller: inner turn-rate loop and outer orientation loop.

Both loops share the feedforward/feedback pattern.  The inner loop commands
the steering deflection so the measured inertial yaw rate tracks its set
value; the turn-rate law ``psi_dot' = g_k v_a delta`` makes the plant a pure
gain, which the 1/K block cancels, leaving a linear loop for the PI feedback.

The outer loop turns step-wise orientation set values (from target-point
switching) into smooth, time-optimal reference trajectories ``psi_c`` that
respect the deflection and deflection-rate limits of the control pod, and
commands the inner loop accordingly.

Controller objects hold their filter/integrator state; one writer per
instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import LowAirspeedError
from .model import KiteParams

# Air path speed below which the 1/K gain inversion is no longer trusted.
V_FLOOR = 1.0


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def k_psidot(v_a: float, params: KiteParams) -> float:
    """Turn-rate-law plant gain K = g_k * v_a.

    Raises:
        LowAirspeedError: below V_FLOOR the inverse gain 1/K used by the
            controllers blows up; callers must hold their last output.
    """
    if v_a < V_FLOOR:
        raise LowAirspeedError(f"air path speed {v_a:.2f} m/s below controllable floor")
    return params.steering_gain * v_a


@dataclass
class GravityAttitude:
    """Gravity-frame angles for the optional turn-rate offset compensation.

    The angles live in a different frame than the kite states; they are
    treated as opaque inputs here.
    """

    theta_g: float
    psi_g: float


class LowPass:
    """First-order low pass, discretized as exponential smoothing."""

    def __init__(self, tau: float):
        self.tau = tau
        self.y = 0.0

    def reset(self, y0: float = 0.0):
        self.y = y0

    def step(self, x: float, dt: float) -> float:
        if self.tau <= 0.0:
            self.y = x
        else:
            self.y += (1.0 - math.exp(-dt / self.tau)) * (x - self.y)
        return self.y


class RateLimiter:
    """Slope limiter: output follows the input at a bounded rate."""

    def __init__(self, rate: float, y0: float = 0.0):
        self.rate = rate
        self.y = y0

    def reset(self, y0: float = 0.0):
        self.y = y0

    def step(self, x: float, dt: float) -> float:
        step = clamp(x - self.y, -self.rate * dt, self.rate * dt)
        self.y += step
        return self.y


class ActuatorModel:
    """Control-pod steering model: deflection limit plus rate limit.

    Guarantees |delta| <= delta_s and |d delta / dt| <= delta_dot_p for every
    emitted sample.
    """

    def __init__(self, delta_s: float, delta_dot_p: float):
        self.delta_s = delta_s
        self.delta_dot_p = delta_dot_p
        self.delta = 0.0

    def reset(self, delta0: float = 0.0):
        self.delta = clamp(delta0, -self.delta_s, self.delta_s)

    def step(self, command: float, dt: float) -> float:
        target = clamp(command, -self.delta_s, self.delta_s)
        self.delta += clamp(target - self.delta, -self.delta_dot_p * dt, self.delta_dot_p * dt)
        return self.delta


@dataclass
class InnerLoopConfig:
    kp: float = 0.5
    ki: float = 0.2
    lowpass_tau: float = 0.1
    error_limit: float = 0.5      # rad/s
    gravity_enabled: bool = False

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0:
            raise ValueError("PI gains must be non-negative")
        if self.error_limit <= 0:
            raise ValueError("error limiter bound must be positive")


class CrosstermMode(Enum):
    """Crossterm source for the outer-loop internal model.

    STEP feeds the measured crossterm into the shaping loop (appropriate for
    externally imposed step set values); TARGET_POINT zeroes it, because on
    the final course toward a target point the free motion already satisfies
    d psi_s / dt ~ psi_dot_ct.
    """

    STEP = "step"
    TARGET_POINT = "target-point"


@dataclass
class OuterLoopConfig:
    kp: float = 0.8
    lowpass_tau: float = 0.2
    error_limit: float = 1.0      # rad
    mode: CrosstermMode = CrosstermMode.TARGET_POINT

    def __post_init__(self):
        if self.kp <= 0:
            raise ValueError("proportional gain must be positive")


class InnerLoopController:
    """Turn-rate controller (feedforward through 1/K, PI feedback).

    Feedforward: delta_ff = psi_dot_s' / K - T1, shaped by its own limiter
    and rate limiter.  Feedback: the set/measured error is limited, low-pass
    filtered, fed to a PI, and scaled by 1/K.  The summed command passes
    through the actuator model, whose output is the deflection applied to
    the kite.  The PI integrator is frozen while the actuator saturates
    (anti-windup).
    """

    def __init__(self, cfg: InnerLoopConfig, params: KiteParams):
        self.cfg = cfg
        self.params = params
        self.ff_shaper = ActuatorModel(params.deflection_limit, params.deflection_rate_limit)
        self.actuator = ActuatorModel(params.deflection_limit, params.deflection_rate_limit)
        self.lowpass = LowPass(cfg.lowpass_tau)
        self.integrator = 0.0
        self.stalled = False
        self.last_feedforward = 0.0
        self.last_feedback = 0.0

    def reset(self, delta0: float = 0.0):
        self.ff_shaper.reset(delta0)
        self.actuator.reset(delta0)
        self.lowpass.reset()
        self.integrator = 0.0
        self.stalled = False
        self.last_feedforward = 0.0
        self.last_feedback = 0.0

    def step(
        self,
        psi_dot_s_prime: float,
        psi_dot_m_prime: float,
        v_a: float,
        dt: float,
        gravity: Optional[GravityAttitude] = None,
    ) -> float:
        if v_a < V_FLOOR:
            # hold the last deflection rather than inverting a vanishing gain
            self.stalled = True
            return self.actuator.delta
        self.stalled = False
        k = k_psidot(v_a, self.params)

        t1 = 0.0
        if self.cfg.gravity_enabled and gravity is not None:
            t1 = (self.params.gravity_turn_param / k) * (
                math.cos(gravity.theta_g) * math.sin(gravity.psi_g) / v_a
            )
        delta_ff = self.ff_shaper.step(psi_dot_s_prime / k - t1, dt)

        err = clamp(psi_dot_s_prime - psi_dot_m_prime, -self.cfg.error_limit, self.cfg.error_limit)
        err_f = self.lowpass.step(err, dt)
        pi_out = self.cfg.kp * err_f + self.integrator
        delta_fb = pi_out / k

        command = delta_ff + delta_fb
        delta = self.actuator.step(command, dt)
        saturated = abs(command - delta) > 1e-12
        if not saturated:
            self.integrator += self.cfg.ki * err_f * dt

        self.last_feedforward = delta_ff
        self.last_feedback = delta_fb
        return delta


def f_scaling(
    x: float,
    delta_dot_p: float,
    k: float,
    psi_dot_ct_star: float = 0.0,
    psi_dot_s: float = 0.0,
) -> float:
    """Braking-parabola feedback of the outer-loop shaping model.

    Returns the deflection from which steering back at the full rate limit
    closes exactly the orientation error ``x``:

        delta_i = sign(x) sqrt(2 delta_dot_p |x| / k) - (psi_dot_ct_star - psi_dot_s) / k

    The 1/k under the square root keeps the output in actuator units.
    """
    if k <= 0:
        raise ValueError("plant gain must be positive")
    mag = math.sqrt(2.0 * delta_dot_p * abs(x) / k)
    return math.copysign(mag, x) - (psi_dot_ct_star - psi_dot_s) / k


class OuterLoopController:
    """Orientation controller with a time-optimal shaping model.

    The internal loop propagates a reference ``psi_c`` through a model of
    actuator and plant: the braking-parabola feedback ``f_scaling`` drives a
    limited, rate-limited model deflection whose turn rate (plus the chosen
    crossterm) integrates into psi_c.  Steps in ``psi_s`` therefore turn
    into S-shaped reference curves that the real actuator can follow
    exactly.

    The command sent to the inner loop is the model turn rate plus a
    proportional feedback that regulates the measured orientation onto the
    shaped reference psi_c (regulating onto the raw set value would fight
    the braking phase of every curve), corrected by the measured crossterm
    so the inner loop tracks an inertial rate.
    """

    def __init__(self, cfg: OuterLoopConfig, params: KiteParams):
        self.cfg = cfg
        self.params = params
        self.model_actuator = ActuatorModel(params.deflection_limit, params.deflection_rate_limit)
        self.lowpass = LowPass(cfg.lowpass_tau)
        self.psi_c = 0.0
        self.stalled = False
        self.last_feedforward_rate = 0.0
        self.last_feedback_rate = 0.0

    def reset(self, psi_c0: float = 0.0):
        self.model_actuator.reset()
        self.lowpass.reset()
        self.psi_c = psi_c0
        self.stalled = False
        self.last_feedforward_rate = 0.0
        self.last_feedback_rate = 0.0

    def step(
        self,
        psi_s: float,
        psi_m: float,
        psi_dot_ct: float,
        v_a: float,
        dt: float,
    ) -> tuple[float, float]:
        """Advance one sample; returns (psi_dot_s_prime, psi_c)."""
        if v_a < V_FLOOR:
            self.stalled = True
            return 0.0, self.psi_c
        self.stalled = False
        k = k_psidot(v_a, self.params)
        ct_star = psi_dot_ct if self.cfg.mode is CrosstermMode.STEP else 0.0

        err = clamp(self.psi_c - psi_m, -self.cfg.error_limit, self.cfg.error_limit)
        rate_fb = self.cfg.kp * self.lowpass.step(err, dt)

        delta_ff = self.model_actuator.step(
            f_scaling(psi_s - self.psi_c, self.params.deflection_rate_limit, k, ct_star), dt
        )
        rate_ff = k * delta_ff
        self.psi_c += dt * (rate_ff + ct_star)

        # inner loop tracks inertial rates: subtract the sphere's crossterm;
        # in STEP mode the model already carries it, so it cancels out.  The
        # summed command is held within the meta-actuator authority K*delta_s;
        # asking for more would only produce untrackable set values.
        authority = k * self.params.deflection_limit
        psi_dot_s_prime = clamp(
            rate_ff + rate_fb - psi_dot_ct + ct_star, -authority, authority
        )
        self.last_feedforward_rate = rate_ff
        self.last_feedback_rate = rate_fb
        return psi_dot_s_prime, self.psi_c

"""Target-point guidance and the pumping-cycle state machine.

Figure-eight patterns are generated by steering toward one of two symmetric
target points on the unit sphere and switching to the other one shortly
before arrival.  Transfer, return and restart phases steer toward a third
point placed above the zenith whose elevation retreats with the kite, so it
is never reached.  Cycle phases switch on geometric triggers and tether
length limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import TargetSingularityError
from .model import KiteParams, KiteState, WindCondition, psi_from_gamma

# Angular distance below which the great-circle direction is numerically moot.
TARGET_TOL = 1e-9


class TargetId(Enum):
    TP1 = "TP1"
    TP2 = "TP2"
    TP3 = "TP3"


@dataclass(frozen=True)
class TargetPoint:
    phi_tp: float
    theta_tp: float
    id: TargetId


class PhaseKind(Enum):
    POWER = "power"
    TRANSFER = "transfer"
    RETURN = "return"
    RESTART = "restart"


@dataclass(frozen=True)
class CyclePhase:
    """Cycle state: phase kind plus the active power target (TP1/TP2)."""

    kind: PhaseKind
    active_power_tp: TargetId = TargetId.TP1

    @property
    def name(self) -> str:
        if self.kind is PhaseKind.POWER:
            return f"power_{self.active_power_tp.value.lower()}"
        return self.kind.value


@dataclass(frozen=True)
class CycleConfig:
    """Geometry and switching limits of the pumping cycle.

    TP2 mirrors TP1 across the vertical plane (phi_tp2 = -phi_tp1, same
    theta).  theta_tp3 is dynamic; phi_tp3 > 0 makes the transfer exit from
    the TP1 side.
    """

    phi_tp1: float = 0.6
    theta_tp1: float = 1.0
    sigma: float = 0.15            # trigger radius [rad]
    l_transfer: float = 270.0      # power -> transfer above this length [m]
    l_restart: float = 130.0       # return -> restart below this length [m]
    delta_theta_tp3: float = 0.3   # TP3 elevation lead over the kite [rad]
    phi_tp3: float = 0.4
    theta_return_boundary: float = 1.05   # transfer -> return at the winch-law pivot
    theta_restart_exit: float = 0.95      # restart -> power when diving below this

    def __post_init__(self):
        if not (0.0 < self.sigma < 0.5):
            raise ValueError("trigger radius sigma must lie in (0, 0.5) rad")
        if self.l_restart >= self.l_transfer:
            raise ValueError("l_restart must be below l_transfer")

    def tp1(self) -> TargetPoint:
        return TargetPoint(self.phi_tp1, self.theta_tp1, TargetId.TP1)

    def tp2(self) -> TargetPoint:
        return TargetPoint(-self.phi_tp1, self.theta_tp1, TargetId.TP2)

    def power_tp(self, which: TargetId) -> TargetPoint:
        return self.tp1() if which is TargetId.TP1 else self.tp2()


def target_direction(phi_m: float, theta_m: float, tp: TargetPoint) -> float:
    """Great-circle course from the current position to a target point.

    gamma_s = atan2( sin(phi_m - phi_tp),
                     cos(theta_m) cos(phi_tp - phi_m) - cot(theta_tp) sin(theta_m) )

    Raises:
        TargetSingularityError: at the target point the direction is undefined.
    """
    dphi = phi_m - tp.phi_tp
    dtheta = theta_m - tp.theta_tp
    if abs(dphi) < TARGET_TOL and abs(dtheta) < TARGET_TOL:
        raise TargetSingularityError("great-circle course undefined at the target point")
    y = math.sin(dphi)
    x = math.cos(theta_m) * math.cos(-dphi) - (math.cos(tp.theta_tp) / math.sin(tp.theta_tp)) * math.sin(theta_m)
    return math.atan2(y, x)


def unwrap_course(gamma_raw: float, gamma_prev: float) -> float:
    """Shift a course angle by 2*pi*k so it lies within pi of the previous one.

    Keeps the course continuous while tracking a fixed target; branch
    selection at target switches is a separate decision (see
    :func:`switch_course`), because the nearest branch is not always the
    wanted turn direction.
    """
    two_pi = 2.0 * math.pi
    k = round((gamma_prev - gamma_raw) / two_pi)
    return gamma_raw + k * two_pi


def switch_course(gamma_raw: float, gamma_prev: float, direction: float) -> float:
    """Course branch at a target switch with an imposed turn direction.

    Picks the 2*pi branch of ``gamma_raw`` whose offset from ``gamma_prev``
    has the sign of ``direction`` (smallest such turn).  The figure-eight
    emerges from alternating turn directions at the two power target points;
    the nearest branch alone would fly circles, so the offset has to be
    chosen deliberately at every switch and then kept until the next one.
    """
    two_pi = 2.0 * math.pi
    delta = math.fmod(gamma_raw - gamma_prev, two_pi)
    if direction > 0.0 and delta <= 0.0:
        delta += two_pi
    elif direction < 0.0 and delta >= 0.0:
        delta -= two_pi
    return gamma_prev + delta


def trigger(phi_m: float, theta_m: float, tp: TargetPoint, sigma: float) -> bool:
    """Proximity trigger on the squared angular distance on the unit sphere.

    (phi_m - phi_tp)^2 sin^2(theta_tp) + (theta_m - theta_tp)^2 <= sigma^2
    """
    dphi = phi_m - tp.phi_tp
    dtheta = theta_m - tp.theta_tp
    s = math.sin(tp.theta_tp)
    return dphi * dphi * s * s + dtheta * dtheta <= sigma * sigma


def tp3_position(theta_m: float, cfg: CycleConfig) -> TargetPoint:
    """Transfer/return target: elevation retreats ahead of the kite.

    theta_tp3 = max(pi/2, theta_m + delta_theta); the point is never reached,
    which keeps the great-circle direction well defined.
    """
    theta = max(0.5 * math.pi, theta_m + cfg.delta_theta_tp3)
    return TargetPoint(cfg.phi_tp3, theta, TargetId.TP3)


def curve_radius(delta_s: float, params: KiteParams) -> float:
    """Steady-turn radius r = 1 / (g_k delta_s) at full deflection."""
    if delta_s <= 0:
        raise ValueError("deflection must be positive")
    return 1.0 / (params.steering_gain * delta_s)


def cycle_step(
    phase: CyclePhase,
    phi_m: float,
    theta_m: float,
    l: float,
    cfg: CycleConfig,
) -> tuple[CyclePhase, TargetPoint]:
    """Advance the cycle state machine one sample.

    Power: the active target trigger switches TP1 <-> TP2; from the TP1
    state with the line beyond l_transfer it enters Transfer instead (TP3
    sits on the TP1 side).  Transfer becomes Return when the kite climbs
    past the winch-law pivot angle; Return becomes Restart below l_restart;
    Restart rejoins Power at TP1 arrival or once the dive passes below the
    restart exit angle.

    Returns the (possibly unchanged) phase and the active target point.
    """
    if phase.kind is PhaseKind.POWER:
        active = cfg.power_tp(phase.active_power_tp)
        if trigger(phi_m, theta_m, active, cfg.sigma):
            if phase.active_power_tp is TargetId.TP1 and l >= cfg.l_transfer:
                phase = CyclePhase(PhaseKind.TRANSFER)
                return phase, tp3_position(theta_m, cfg)
            other = TargetId.TP2 if phase.active_power_tp is TargetId.TP1 else TargetId.TP1
            phase = CyclePhase(PhaseKind.POWER, other)
            return phase, cfg.power_tp(other)
        return phase, active

    if phase.kind is PhaseKind.TRANSFER:
        if theta_m >= cfg.theta_return_boundary:
            phase = CyclePhase(PhaseKind.RETURN)
        return phase, tp3_position(theta_m, cfg)

    if phase.kind is PhaseKind.RETURN:
        if l <= cfg.l_restart:
            phase = CyclePhase(PhaseKind.RESTART, TargetId.TP1)
            return phase, cfg.tp1()
        return phase, tp3_position(theta_m, cfg)

    # restart: dive back toward TP1 until arrival or past the exit angle
    if trigger(phi_m, theta_m, cfg.tp1(), cfg.sigma) or theta_m < cfg.theta_restart_exit:
        phase = CyclePhase(PhaseKind.POWER, TargetId.TP1)
        return phase, cfg.tp1()
    return phase, cfg.tp1()


class Guidance:
    """Course bookkeeping: direction to target, unwrapping, orientation set value.

    Holds the unwrapped course so the 2*pi branch chosen at a target switch
    persists through the curve.  Switches onto TP1 or TP2 impose the turn
    direction toward the side of the new target (the curve rolls into a
    dive); switches onto the retreating transfer target take the nearest
    branch (gentle pull-up).
    """

    def __init__(self, params: KiteParams):
        self.params = params
        self.gamma_s: Optional[float] = None
        self._last_tp: Optional[TargetId] = None

    def reset(self):
        self.gamma_s = None
        self._last_tp = None

    def setpoint_psi(
        self,
        state: KiteState,
        tp: TargetPoint,
        l_dot: float,
        wind: WindCondition,
    ) -> tuple[float, float]:
        """Course and orientation set values toward the active target.

        Composes the great-circle direction, course unwrapping and the
        course -> orientation inversion; the orientation is placed on the
        branch nearest the unwrapped course (their difference is the small
        wind offset).

        Returns:
            (gamma_s, psi_s), both continuous across samples.

        Raises:
            TargetSingularityError, UnreachableDirectionError,
            SingularAirflowError: propagated from the underlying maps.
        """
        raw = target_direction(state.phi, state.theta, tp)
        if self.gamma_s is None:
            gamma = raw
        elif tp.id is not self._last_tp and tp.id is not TargetId.TP3:
            gamma = switch_course(raw, self.gamma_s, tp.phi_tp - state.phi)
        else:
            gamma = unwrap_course(raw, self.gamma_s)
        self.gamma_s = gamma
        self._last_tp = tp.id
        psi_raw = psi_from_gamma(gamma, state.theta, l_dot, wind, self.params)
        psi_s = unwrap_course(psi_raw, gamma)
        return gamma, psi_s

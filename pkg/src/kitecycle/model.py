"""Kite dynamics on the sphere: equations of motion, kinematics, equilibria.

The kite is described by four states ``[phi, theta, psi, l]``: azimuth and
wind-window angle of the tether direction, orientation angle of the kite
with respect to the wind, and tether length.  The wind blows along +x with
speed ``v_w``; ``theta`` is measured from the wind axis, so ``theta = 0``
points straight downwind and ``theta > pi/2`` is windward of the zenith.

Everything in this module is a pure function of its arguments.  Controller
state lives elsewhere (:mod:`kitecycle.control`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateGeometryError,
    EquilibriumRangeError,
    SingularAirflowError,
    UndefinedDirectionError,
    UnreachableDirectionError,
)

# Guard band around theta in {0, pi}: the phi equation is singular there.
THETA_GUARD = 1e-6

# Below this |v_w cos(theta) - l_dot| the course <-> orientation mapping
# degenerates (no airflow component to reference the course against).
AIRFLOW_TOL = 1e-9

# Both direction arguments below this magnitude: static flight, course undefined.
DIRECTION_TOL = 1e-12


@dataclass(frozen=True)
class KiteParams:
    """Physical constants of the kite and its steering actuator.

    Attributes:
        glide_ratio: Lift-to-drag proxy E relating air path speed to the
            effective wind along the kite's roll axis.
        steering_gain: Turn-rate-law gain g_k [rad/m per unit deflection];
            yaw rate responds as g_k * v_a * delta.
        area: Projected kite area [m^2] (already projected; a flat 30 m^2
            ram-air wing projects to roughly 0.7 * 30 = 21 m^2).
        air_density: [kg/m^3].
        force_coefficient: Resultant aerodynamic force coefficient C_R.
        gravity_turn_param: Weight-dependent turn-rate offset M [m/s^2 scale];
            0 disables gravity compensation (the usual operating mode).
        v_a_min: Minimum air path speed for stable flight [m/s].
        deflection_limit: Steering deflection limit delta_s (actuator units).
        deflection_rate_limit: Steering speed limit delta_dot_p [1/s].
    """

    glide_ratio: float
    steering_gain: float
    area: float
    air_density: float = 1.2
    force_coefficient: float = 1.0
    gravity_turn_param: float = 0.0
    v_a_min: float = 5.0
    deflection_limit: float = 0.4
    deflection_rate_limit: float = 0.8

    def __post_init__(self):
        if self.glide_ratio <= 0:
            raise ValueError("glide_ratio must be positive")
        if self.steering_gain <= 0:
            raise ValueError("steering_gain must be positive")
        if self.area <= 0 or self.air_density <= 0 or self.force_coefficient <= 0:
            raise ValueError("area, air_density and force_coefficient must be positive")
        if self.v_a_min < 0:
            raise ValueError("v_a_min must be non-negative")


@dataclass(frozen=True)
class WindCondition:
    """Ambient wind: constant and homogeneous along +x."""

    v_w: float

    def __post_init__(self):
        if self.v_w <= 0:
            raise ValueError("wind speed must be positive")


@dataclass(frozen=True)
class KiteState:
    """Kite state [phi, theta, psi, l].

    ``theta`` must stay in (0, pi) and ``l`` positive.  ``psi`` and ``phi``
    are kept continuous (unwrapped) internally; wrap only when serializing.
    """

    phi: float
    theta: float
    psi: float
    l: float

    def as_array(self) -> np.ndarray:
        return np.array([self.phi, self.theta, self.psi, self.l])

    @staticmethod
    def from_array(x) -> "KiteState":
        return KiteState(phi=float(x[0]), theta=float(x[1]), psi=float(x[2]), l=float(x[3]))


@dataclass(frozen=True)
class ControlInput:
    """Plant inputs: steering deflection and commanded tether speed."""

    delta: float
    v_winch: float


@dataclass(frozen=True)
class StateDerivative:
    """Time derivatives of the four kite states."""

    phi_dot: float
    theta_dot: float
    psi_dot: float
    l_dot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.phi_dot, self.theta_dot, self.psi_dot, self.l_dot])


def position(state: KiteState) -> np.ndarray:
    """Cartesian kite position from the polar tether direction.

    r = l * (cos(theta), sin(phi) sin(theta), -cos(phi) sin(theta)),
    with x downwind and |r| = l.
    """
    st = math.sin(state.theta)
    return state.l * np.array(
        [
            math.cos(state.theta),
            math.sin(state.phi) * st,
            -math.cos(state.phi) * st,
        ]
    )


def air_path_speed(state: KiteState, l_dot: float, wind: WindCondition, params: KiteParams) -> float:
    """Air path speed at the kite: v_a = v_w E cos(theta) - l_dot E.

    Reeling out (l_dot > 0) reduces the airflow, reeling in drives it.  The
    value can go negative under extreme reel-out at deep window angles; that
    regime is a stall and outside the model's validity.
    """
    E = params.glide_ratio
    return wind.v_w * E * math.cos(state.theta) - l_dot * E


def derivatives(
    state: KiteState,
    control: ControlInput,
    v_a: float,
    wind: WindCondition,
    params: KiteParams,
) -> StateDerivative:
    """Equations of motion of the four-state kite model.

        psi_dot   = g_k v_a delta + phi_dot cos(theta)
        theta_dot = (v_w / l) (E cos(theta) cos(psi) - sin(theta)) - (l_dot / l) E cos(psi)
        phi_dot   = -((v_w E cos(theta) - l_dot E) / (l sin(theta))) sin(psi)
        l_dot     = v_winch

    The measured air path speed ``v_a`` is taken as an input (it is easy to
    measure on board, unlike the wind at flight altitude) and is used only in
    the steering term; the sphere kinematics are written in terms of ``v_w``
    so they stay regular at theta = pi/2.

    Raises:
        DegenerateGeometryError: if sin(theta) <= THETA_GUARD.
    """
    st = math.sin(state.theta)
    if st <= THETA_GUARD:
        raise DegenerateGeometryError(
            f"wind window angle theta={state.theta:.6f} rad too close to the wind axis"
        )
    if state.l <= 0:
        raise DegenerateGeometryError(f"tether length l={state.l:.3f} m must be positive")

    E = params.glide_ratio
    ct = math.cos(state.theta)
    cp = math.cos(state.psi)
    sp = math.sin(state.psi)
    l_dot = control.v_winch

    phi_dot = -(wind.v_w * E * ct - l_dot * E) / (state.l * st) * sp
    theta_dot = (wind.v_w / state.l) * (E * ct * cp - st) - (l_dot / state.l) * E * cp
    psi_dot = params.steering_gain * v_a * control.delta + phi_dot * ct
    return StateDerivative(phi_dot=phi_dot, theta_dot=theta_dot, psi_dot=psi_dot, l_dot=l_dot)


def crossterm(state: KiteState, v_a: float) -> float:
    """Kinematic cross-coupling psi_dot_ct = phi_dot cos(theta).

    Written in terms of measurable quantities:
    psi_dot_ct = -v_a sin(psi) / (l tan(theta)).  This is the difference
    between d(psi)/dt and the inertial yaw rate a body-fixed gyro measures.
    """
    st = math.sin(state.theta)
    if abs(st) <= THETA_GUARD:
        raise DegenerateGeometryError(
            f"crossterm undefined at theta={state.theta:.6f} rad"
        )
    return -v_a * math.sin(state.psi) * math.cos(state.theta) / (state.l * st)


def flight_direction_kinematic(phi_dot: float, theta_dot: float, theta: float) -> float:
    """Course angle gamma = atan2(-phi_dot sin(theta), theta_dot).

    gamma = 0 means motion toward larger theta (climbing away from the wind
    axis along the meridian).  Undefined for (near-)static flight.

    Raises:
        UndefinedDirectionError: if both arguments are below tolerance.
    """
    y = -phi_dot * math.sin(theta)
    if abs(y) < DIRECTION_TOL and abs(theta_dot) < DIRECTION_TOL:
        raise UndefinedDirectionError("static flight: course angle undefined")
    return math.atan2(y, theta_dot)


def course_wind_offset(theta: float, l_dot: float, wind: WindCondition, params: KiteParams) -> float:
    """Offset c1 between course and orientation due to the background wind.

    c1 = (1/E) * v_w sin(theta) / (v_w cos(theta) - l_dot).  Small in fast
    crosswind flight, where course and orientation nearly coincide.

    Raises:
        SingularAirflowError: if |v_w cos(theta) - l_dot| < AIRFLOW_TOL.
    """
    denom = wind.v_w * math.cos(theta) - l_dot
    if abs(denom) < AIRFLOW_TOL:
        raise SingularAirflowError(
            "course/orientation mapping singular: v_w cos(theta) - l_dot ~ 0"
        )
    return wind.v_w * math.sin(theta) / (params.glide_ratio * denom)


def gamma_from_psi(
    psi: float, theta: float, l_dot: float, wind: WindCondition, params: KiteParams
) -> float:
    """Course angle from orientation: gamma = atan2(sin(psi), cos(psi) - c1)."""
    c1 = course_wind_offset(theta, l_dot, wind, params)
    return math.atan2(math.sin(psi), math.cos(psi) - c1)


def psi_from_gamma(
    gamma: float, theta: float, l_dot: float, wind: WindCondition, params: KiteParams
) -> float:
    """Orientation that realizes a commanded course angle.

    Inverts :func:`gamma_from_psi`:

        r = sqrt(1 - c1^2 sin^2(gamma)) - c1 cos(gamma)
        psi = atan2(r sin(gamma), c1 + r cos(gamma))

    ``r`` is the normalized speed the kite makes good along the course.  A
    solution requires a real root (c1^2 sin^2(gamma) <= 1) *and* r >= 0; for
    |c1| < 1 both always hold and the course <-> orientation map is a
    bijection of the circle.  For |c1| > 1 (slow flight deep in the window)
    only a limited fan of courses is reachable.

    Raises:
        UnreachableDirectionError: if the commanded course cannot be flown
            at this wind state (complex or negative root).
        SingularAirflowError: propagated from the offset computation.
    """
    c1 = course_wind_offset(theta, l_dot, wind, params)
    sg = math.sin(gamma)
    cg = math.cos(gamma)
    disc = 1.0 - c1 * c1 * sg * sg
    if disc < 0.0:
        raise UnreachableDirectionError(
            f"course gamma={gamma:.4f} rad unreachable (c1={c1:.4f})"
        )
    r = math.sqrt(disc) - c1 * cg
    if r < 0.0:
        raise UnreachableDirectionError(
            f"course gamma={gamma:.4f} rad unreachable against the wind offset (c1={c1:.4f})"
        )
    return math.atan2(r * sg, c1 + r * cg)


def equilibrium_theta(
    psi: float, l_dot: float, wind: WindCondition, params: KiteParams
) -> float:
    """Steady wind-window angle for constant orientation and winch speed.

    theta_eq = arctan(E cos(psi))
               - arcsin( cos(psi) / sqrt(cos^2(psi) + 1/E^2) * l_dot / v_w )

    Winching in (l_dot < 0) raises the equilibrium angle (kite comes forth,
    windward), winching out lowers it (kite falls back downwind).

    Raises:
        EquilibriumRangeError: if the arcsin argument exceeds 1 in magnitude
            (winch speed incompatible with a steady angle).
    """
    E = params.glide_ratio
    cp = math.cos(psi)
    theta0 = math.atan(E * cp)
    arg = cp / math.sqrt(cp * cp + 1.0 / (E * E)) * (l_dot / wind.v_w)
    if abs(arg) > 1.0:
        raise EquilibriumRangeError(
            f"winch speed l_dot={l_dot:.3f} m/s has no steady window angle"
        )
    return theta0 - math.asin(arg)


def min_winch_speed_bound(theta: float, wind: WindCondition, params: KiteParams) -> float:
    """Upper bound on l_dot that keeps v_a above the stable-flight minimum.

    Holding l_dot strictly below ``-v_a_min/E + v_w cos(theta)`` keeps
    v_a > v_a_min.  Windward of the zenith (theta > pi/2) this bound is
    negative: the winch must keep reeling in, never stop suddenly.
    """
    return -params.v_a_min / params.glide_ratio + wind.v_w * math.cos(theta)


def tether_force(v_a: float, params: KiteParams) -> float:
    """Tether force F = (rho/2) C_R A v_a^2.

    Negative v_a (stalled, outside model validity) is clamped to zero force.
    """
    v = max(v_a, 0.0)
    return 0.5 * params.air_density * params.force_coefficient * params.area * v * v


def _state_derivative_array(x: np.ndarray, control: ControlInput, wind: WindCondition, params: KiteParams) -> np.ndarray:
    state = KiteState.from_array(x)
    v_a = air_path_speed(state, control.v_winch, wind, params)
    return derivatives(state, control, v_a, wind, params).as_array()


def integrate_step(
    state: KiteState,
    control: ControlInput,
    wind: WindCondition,
    params: KiteParams,
    dt: float,
) -> KiteState:
    """One fixed-step RK4 step of the equations of motion.

    The air path speed is recomputed from the wind relation at every
    substage, holding the control input constant across the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = state.as_array()
    k1 = _state_derivative_array(x, control, wind, params)
    k2 = _state_derivative_array(x + 0.5 * dt * k1, control, wind, params)
    k3 = _state_derivative_array(x + 0.5 * dt * k2, control, wind, params)
    k4 = _state_derivative_array(x + dt * k3, control, wind, params)
    return KiteState.from_array(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi].  For serialization boundaries only."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi

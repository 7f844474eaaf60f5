"""Closed-loop simulation: plant + cascaded controllers + cycle and winch control.

One fixed-step loop per sample: measure (ideal sensors from the true state,
optionally perturbed by seeded noise), advance the cycle state machine,
compute the orientation set value toward the active target, run the outer
and inner control loops, pick the winch law for the phase, apply the force
override and the winch drive model, then integrate the plant.  Deterministic
for a given config; telemetry is streamed to CSV with per-second flushes so
an abort leaves the partial record on disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import model
from .config import SimConfig
from .control import V_FLOOR, InnerLoopController, OuterLoopController
from .errors import KiteCycleError, LowAirspeedError, NoCompleteCycleError
from .guidance import CyclePhase, Guidance, PhaseKind, TargetId, cycle_step
from .model import ControlInput, KiteState, WindCondition, wrap_angle
from .winch import (
    WinchActuator,
    force_limit_override,
    power_phase_speed,
    restart_speed,
    transfer_return_speed,
)

TELEMETRY_COLUMNS = [
    "t",
    "phi",
    "theta",
    "psi",
    "l",
    "delta",
    "v_winch_cmd",
    "v_winch_actual",
    "v_a",
    "gamma_s",
    "psi_s",
    "psi_c",
    "phase",
    "F",
    "P_mech",
]


@dataclass(frozen=True)
class TelemetryRecord:
    """One simulation sample.  ``P_mech = F * v_winch_actual`` by construction.

    ``phi`` and ``psi`` are wrapped to (-pi, pi] at this boundary; the course
    and reference angles (gamma_s, psi_s, psi_c) stay continuous.
    """

    t: float
    phi: float
    theta: float
    psi: float
    l: float
    delta: float
    v_winch_cmd: float
    v_winch_actual: float
    v_a: float
    gamma_s: float
    psi_s: float
    psi_c: float
    phase: str
    F: float
    P_mech: float

    def csv_row(self) -> str:
        vals = [
            self.t,
            self.phi,
            self.theta,
            self.psi,
            self.l,
            self.delta,
            self.v_winch_cmd,
            self.v_winch_actual,
            self.v_a,
            self.gamma_s,
            self.psi_s,
            self.psi_c,
        ]
        tail = [self.F, self.P_mech]
        return (
            ",".join(f"{v:.9g}" for v in vals)
            + f",{self.phase},"
            + ",".join(f"{v:.9g}" for v in tail)
        )


@dataclass(frozen=True)
class CycleReport:
    """Energy bookkeeping of one complete pumping cycle."""

    cycle_index: int
    T: float
    W_out: float
    W_in: float
    P_bar_cycle: float
    F_peak: float
    v_a_min: float

    def as_dict(self) -> dict:
        return {
            "cycle_index": self.cycle_index,
            "T": self.T,
            "W_out": self.W_out,
            "W_in": self.W_in,
            "P_bar_cycle": self.P_bar_cycle,
            "F_peak": self.F_peak,
            "v_a_min": self.v_a_min,
        }


@dataclass
class RunResult:
    """Simulation output: telemetry, cycle reports, and abort status."""

    records: list
    reports: list
    aborted: bool = False
    abort_reason: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return not self.aborted


def _winch_set_value(phase: CyclePhase, v_a_m: float, theta_m: float, v_w: float, cfg: SimConfig) -> float:
    if phase.kind is PhaseKind.POWER:
        return power_phase_speed(v_a_m, cfg.winch, cfg.params)
    if phase.kind in (PhaseKind.TRANSFER, PhaseKind.RETURN):
        return transfer_return_speed(theta_m, v_w, cfg.winch)
    return restart_speed(theta_m, v_w, cfg.winch, cfg.params)


def run_simulation(cfg: SimConfig, telemetry_path=None) -> RunResult:
    """Run the closed loop for ``cfg.duration`` seconds.

    Aborts (with partial telemetry flushed and ``aborted=True``) when the
    geometry degenerates, the airspeed collapses below the controllable
    floor, or guidance cannot realize a course at the current wind state.
    """
    params, wind_ref = cfg.params, cfg.wind
    dt = cfg.dt
    n_steps = int(round(cfg.duration / dt))

    guidance = Guidance(params)
    outer = OuterLoopController(cfg.outer_loop, params)
    inner = InnerLoopController(cfg.inner_loop, params)
    winch = WinchActuator(cfg.winch, dt)
    phase = CyclePhase(PhaseKind.POWER, TargetId.TP1)

    rng = np.random.default_rng(cfg.noise.seed) if cfg.noise.enabled else None

    state = KiteState(phi=cfg.phi0, theta=cfg.theta0, psi=cfg.psi0 or 0.0, l=cfg.l0)
    delta = 0.0
    l_dot_actual = 0.0
    initialized = cfg.psi0 is not None

    records: list[TelemetryRecord] = []
    diag = {k: [] for k in ("t", "psi_dot_s_prime", "psi_dot_m_prime", "psi_m", "psi_s",
                            "psi_c", "inner_ff", "inner_fb", "v_w", "phase")}
    reports: list[CycleReport] = []
    aborted = False
    reason = ""

    fh = open(telemetry_path, "w") if telemetry_path is not None else None
    if fh is not None:
        fh.write(",".join(TELEMETRY_COLUMNS) + "\n")
    flush_every = max(1, int(round(1.0 / dt)))

    try:
        for step_i in range(n_steps):
            t = step_i * dt
            v_w = cfg.gust.wind_at(t) if cfg.gust is not None else wind_ref.v_w
            wind = WindCondition(v_w=v_w)

            v_a = model.air_path_speed(state, l_dot_actual, wind, params)
            if v_a < V_FLOOR:
                raise LowAirspeedError(
                    f"air path speed {v_a:.2f} m/s below controllable floor (stall)"
                )

            # ideal sensors from the true state; optional seeded noise
            phi_m, theta_m, psi_m = state.phi, state.theta, state.psi
            psi_dot_m_prime = params.steering_gain * v_a * delta
            v_a_m = v_a
            if rng is not None:
                phi_m += rng.normal(0.0, cfg.noise.angle_std)
                theta_m += rng.normal(0.0, cfg.noise.angle_std)
                psi_m += rng.normal(0.0, cfg.noise.angle_std)
                psi_dot_m_prime += rng.normal(0.0, cfg.noise.rate_std)
                v_a_m = max(0.0, v_a_m + rng.normal(0.0, cfg.noise.airspeed_std))

            prev_kind = phase.kind
            phase, tp = cycle_step(phase, phi_m, theta_m, state.l, cfg.cycle)
            if prev_kind is PhaseKind.RESTART and phase.kind is PhaseKind.POWER:
                reports_boundary = True
            else:
                reports_boundary = False

            measured = KiteState(phi=phi_m, theta=theta_m, psi=psi_m, l=state.l)
            gamma_s, psi_s = guidance.setpoint_psi(measured, tp, l_dot_actual, wind)
            if not initialized:
                # start aligned with the commanded orientation: no artificial
                # initial curve
                state = KiteState(phi=state.phi, theta=state.theta, psi=psi_s, l=state.l)
                psi_m = psi_s
                outer.reset(psi_c0=psi_s)
                initialized = True

            psi_dot_ct = model.crossterm(measured, v_a_m)
            psi_dot_s_prime, psi_c = outer.step(psi_s, psi_m, psi_dot_ct, v_a_m, dt)
            delta = inner.step(psi_dot_s_prime, psi_dot_m_prime, v_a_m, dt)

            force = model.tether_force(v_a, params)
            l_dot_cmd = _winch_set_value(phase, v_a_m, theta_m, v_w, cfg)
            l_dot_cmd = force_limit_override(force, l_dot_cmd, cfg.winch)
            l_dot_actual = winch.step(l_dot_cmd)

            rec = TelemetryRecord(
                t=t,
                phi=wrap_angle(state.phi),
                theta=state.theta,
                psi=wrap_angle(state.psi),
                l=state.l,
                delta=delta,
                v_winch_cmd=l_dot_cmd,
                v_winch_actual=l_dot_actual,
                v_a=v_a,
                gamma_s=gamma_s,
                psi_s=psi_s,
                psi_c=psi_c,
                phase=phase.name,
                F=force,
                P_mech=force * l_dot_actual,
            )
            records.append(rec)
            if reports_boundary:
                diag.setdefault("cycle_boundaries", []).append(t)
            diag["t"].append(t)
            diag["psi_dot_s_prime"].append(psi_dot_s_prime)
            diag["psi_dot_m_prime"].append(psi_dot_m_prime)
            diag["psi_m"].append(state.psi)
            diag["psi_s"].append(psi_s)
            diag["psi_c"].append(psi_c)
            diag["inner_ff"].append(inner.last_feedforward)
            diag["inner_fb"].append(inner.last_feedback)
            diag["v_w"].append(v_w)
            diag["phase"].append(phase.name)

            if fh is not None:
                fh.write(rec.csv_row() + "\n")
                if (step_i + 1) % flush_every == 0:
                    fh.flush()

            state = model.integrate_step(state, ControlInput(delta, l_dot_actual), wind, params, dt)
    except KiteCycleError as exc:
        aborted = True
        reason = f"t={step_i * dt:.2f} s: {exc}"
    finally:
        if fh is not None:
            fh.flush()
            fh.close()

    diagnostics = {
        k: (np.array(v) if k != "phase" else list(v)) for k, v in diag.items()
    }
    result = RunResult(
        records=records,
        reports=[],
        aborted=aborted,
        abort_reason=reason,
        diagnostics=diagnostics,
    )
    try:
        result.reports = energy_accounting(records)
    except NoCompleteCycleError:
        result.reports = []
    return result


def energy_accounting(records: list) -> list:
    """Split telemetry at restart -> power transitions and integrate energies.

    W_out sums the generating samples (P_mech > 0), W_in the consuming ones;
    the average cycle power is their sum over the cycle duration.  Leading
    and trailing partial cycles are dropped.

    Raises:
        NoCompleteCycleError: fewer than two cycle boundaries in the telemetry.
    """
    if not records:
        raise NoCompleteCycleError("empty telemetry")
    boundaries = []
    prev_phase = records[0].phase
    for i, rec in enumerate(records):
        if prev_phase == "restart" and rec.phase.startswith("power"):
            boundaries.append(i)
        prev_phase = rec.phase
    if len(boundaries) < 2:
        raise NoCompleteCycleError(
            f"need at least two restart->power transitions, found {len(boundaries)}"
        )

    reports = []
    for idx, (a, b) in enumerate(zip(boundaries, boundaries[1:])):
        chunk = records[a:b]
        dt = records[1].t - records[0].t
        w_out = sum(r.P_mech * dt for r in chunk if r.P_mech > 0)
        w_in = sum(r.P_mech * dt for r in chunk if r.P_mech < 0)
        duration = records[b].t - records[a].t
        reports.append(
            CycleReport(
                cycle_index=idx,
                T=duration,
                W_out=w_out,
                W_in=w_in,
                P_bar_cycle=(w_out + w_in) / duration,
                F_peak=max(r.F for r in chunk),
                v_a_min=min(r.v_a for r in chunk),
            )
        )
    return reports


def write_telemetry_csv(records: list, path) -> None:
    """Write telemetry with the fixed column set (9 significant digits)."""
    with open(path, "w") as fh:
        fh.write(",".join(TELEMETRY_COLUMNS) + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")

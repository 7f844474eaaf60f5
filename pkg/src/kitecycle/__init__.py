"""Closed-loop simulator and control library for pumping-cycle kite power.

A four-state kite model on the sphere, a cascaded turn-rate/orientation
flight controller with time-optimal curve shaping, target-point guidance
with the pumping-cycle state machine, phase-specific winch laws, a reduced
cycle-power optimizer, and a deterministic simulation harness with CSV
telemetry.
"""

from .config import SimConfig, load_config, parse_config
from .control import (
    ActuatorModel,
    CrosstermMode,
    InnerLoopConfig,
    InnerLoopController,
    OuterLoopConfig,
    OuterLoopController,
)
from .errors import KiteCycleError
from .guidance import CycleConfig, CyclePhase, Guidance, PhaseKind, TargetId, TargetPoint
from .harness import CycleReport, RunResult, TelemetryRecord, energy_accounting, run_simulation
from .model import ControlInput, KiteParams, KiteState, StateDerivative, WindCondition
from .optimizer import (
    CycleDecision,
    OptimalCycle,
    OptimizerConstraints,
    fit_winch_law,
    loyd_limit,
    optimize_cycle,
    simulate_reduced_cycle,
)
from .winch import WinchActuator, WinchConfig

__version__ = "0.1.0"

__all__ = [
    "ActuatorModel",
    "ControlInput",
    "CrosstermMode",
    "CycleConfig",
    "CycleDecision",
    "CyclePhase",
    "CycleReport",
    "Guidance",
    "InnerLoopConfig",
    "InnerLoopController",
    "KiteCycleError",
    "KiteParams",
    "KiteState",
    "OptimalCycle",
    "OptimizerConstraints",
    "OuterLoopConfig",
    "OuterLoopController",
    "PhaseKind",
    "RunResult",
    "SimConfig",
    "StateDerivative",
    "TargetId",
    "TargetPoint",
    "TelemetryRecord",
    "WinchActuator",
    "WinchConfig",
    "WindCondition",
    "energy_accounting",
    "fit_winch_law",
    "load_config",
    "loyd_limit",
    "optimize_cycle",
    "parse_config",
    "run_simulation",
    "simulate_reduced_cycle",
    "__version__",
]

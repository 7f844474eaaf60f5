"""Exception hierarchy for the kite pumping-cycle library.

All library errors derive from :class:`KiteCycleError` so callers can
catch a single base class at the simulation-loop or CLI boundary.
"""


class KiteCycleError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateGeometryError(KiteCycleError):
    """Wind-window angle too close to 0 or pi; spherical kinematics singular."""


class LowAirspeedError(KiteCycleError):
    """Air path speed below the controllable floor (stall condition)."""


class UndefinedDirectionError(KiteCycleError):
    """Flight direction undefined because the kinematic motion is negligible."""


class SingularAirflowError(KiteCycleError):
    """Course/orientation mapping singular: projected airflow term vanishes."""


class UnreachableDirectionError(KiteCycleError):
    """Commanded flight direction has no orientation solution at this wind state."""


class TargetSingularityError(KiteCycleError):
    """Great-circle direction undefined: position coincides with the target point."""


class EquilibriumRangeError(KiteCycleError):
    """Winch speed incompatible with a steady wind-window angle."""


class NoCompleteCycleError(KiteCycleError):
    """Telemetry does not contain a single complete pumping cycle."""


class InsufficientSamplesError(KiteCycleError):
    """Not enough samples on the requested trajectory branch for a fit."""


class ConfigError(KiteCycleError):
    """Malformed or incomplete configuration input."""

    def __init__(self, msg, field=None, line=None):
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"field '{field}': "
        super().__init__(prefix + msg)


class SimulationAbort(KiteCycleError):
    """Closed-loop simulation aborted; partial telemetry was flushed."""

    def __init__(self, msg, t=None):
        self.t = t
        super().__init__(msg if t is None else f"t={t:.3f} s: {msg}")

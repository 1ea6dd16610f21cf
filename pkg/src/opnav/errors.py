"""Exception types raised by the navigation library."""


class OpnavError(Exception):
    """Base class for all library errors."""


class PropagationError(OpnavError):
    """Two-body propagation or numerical integration failed."""


class LightTimeError(OpnavError):
    """Light-time fixed-point iteration did not converge."""


class DegenerateGeometryError(OpnavError):
    """Observer and target coincide, or a direction is undefined."""


class UnderdeterminedError(OpnavError):
    """Fewer equations than unknowns in a position fix."""


class RankDeficientError(OpnavError):
    """Normal matrix of a position fix is numerically singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class SingularityError(OpnavError):
    """Spacecraft too close to the central body for the dynamics model."""


class NumericalHealthError(OpnavError):
    """Covariance lost symmetry/positive semi-definiteness or became non-finite."""


class InnovationError(OpnavError):
    """Innovation covariance is singular; the update cannot be applied."""


class ConfigError(OpnavError):
    """Scenario configuration is malformed."""


class ScheduleError(OpnavError):
    """Tracking schedule cannot be constructed."""

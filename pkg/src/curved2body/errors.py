"""Exception hierarchy shared by all modules."""


class CurvedTwoBodyError(Exception):
    """Base class for all library errors."""


class DomainError(CurvedTwoBodyError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ChartError(CurvedTwoBodyError, ValueError):
    """A state lies outside the coordinate chart an operation requires."""


class NearCollisionError(CurvedTwoBodyError, RuntimeError):
    """The configuration approached the collision singularity.

    Carries the last valid state when raised from an integration.
    """

    def __init__(self, message, last_time=None, last_state=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state


class NonConvergenceError(CurvedTwoBodyError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class InfeasibleError(CurvedTwoBodyError, ValueError):
    """A requested continuation or seed is outside the feasible set."""


class ConfigError(CurvedTwoBodyError, ValueError):
    """A run configuration is invalid or incomplete."""

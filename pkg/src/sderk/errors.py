"""Exception hierarchy shared by the package."""


class SdeError(Exception):
    """Base class for all errors raised by sderk."""


class GridError(SdeError, ValueError):
    """Invalid time grid (non-positive step count or empty interval)."""


class AggregationError(SdeError, ValueError):
    """Coarsening factor incompatible with the path's grid."""


class IndexDomainError(SdeError, IndexError):
    """Grid index outside ``0..n``."""


class CapabilityError(SdeError):
    """A problem lacks something the operation needs (exact solution, dim 1, ...)."""


class InterpretationError(SdeError):
    """Itô/Stratonovich interpretation not valid for the requested operation."""


class EvaluationError(SdeError, FloatingPointError):
    """Drift or volatility produced a non-finite value during a step."""

    def __init__(self, t, x, message="non-finite stage value"):
        self.t = t
        self.x = x
        super().__init__(f"{message} at t={t!r}, x={x!r}")


class ConfigError(SdeError, ValueError):
    """Inconsistent experiment configuration."""

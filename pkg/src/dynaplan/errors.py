"""Shared exception types."""


class DynaplanError(Exception):
    """Base class for package errors."""


class GenerationError(DynaplanError):
    """Procedural generation could not satisfy its constraints."""


class UsageError(DynaplanError):
    """An operation was called in a state its contract forbids."""


class PlanningError(DynaplanError):
    """A scripted planner had no admissible goal."""


class BackendError(DynaplanError):
    """A model endpoint failed after exhausting its retry budget."""


class ConfigError(DynaplanError):
    """Invalid run configuration."""

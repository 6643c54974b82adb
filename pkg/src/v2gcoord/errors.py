"""Exception types shared across the package."""


class V2gError(Exception):
    """Base class for all package errors."""


class ConfigurationError(V2gError, ValueError):
    """A config value or file is invalid. Message names the offending field."""


class DomainError(V2gError, ValueError):
    """An argument is outside the domain an operation is defined on."""


class PowerLimitError(V2gError, ValueError):
    """A commanded per-EV power exceeds the vehicle's charger limits."""


class InfeasibleError(V2gError, RuntimeError):
    """A command cannot be met without violating an SOC bound.

    Carries the violation magnitude so callers can report how far off the
    request was, or the achievable total for aggregate commands.
    """

    def __init__(self, message, overshoot=None, achievable_kw=None):
        super().__init__(message)
        self.overshoot = overshoot
        self.achievable_kw = achievable_kw


class LifecycleError(V2gError, RuntimeError):
    """An environment or trainer was driven outside its legal state machine."""


class DivergenceError(V2gError, RuntimeError):
    """Training produced a non-finite loss or parameter."""

    def __init__(self, message, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path

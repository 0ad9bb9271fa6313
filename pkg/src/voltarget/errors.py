"""Exception hierarchy shared by every module."""


class VolTargetError(Exception):
    """Base class for all library errors."""


class ValidationError(VolTargetError, ValueError):
    """A value type was constructed with inputs violating its invariants."""


class DomainError(VolTargetError, ValueError):
    """A numerical routine was called outside its mathematical domain."""


class ConfigurationError(VolTargetError):
    """A configuration is incomplete or inconsistent (missing block, bad ladder)."""


class NumericalError(VolTargetError, ArithmeticError):
    """A computation produced a non-finite value."""

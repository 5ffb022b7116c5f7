"""Exception types raised across the package."""


class SlicegradError(Exception):
    """Base class for all package errors."""


class DomainError(SlicegradError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class DegenerateError(SlicegradError, ValueError):
    """A computation has no well-defined result for the given input (e.g. zero norm)."""


class NumericalError(SlicegradError, ArithmeticError):
    """Iteration failed to converge, or an intermediate under/overflowed."""


class ConfigError(SlicegradError, ValueError):
    """Incompatible or invalid configuration."""

"""Exception hierarchy shared across the library."""


class FsarError(Exception):
    """Base class for all library errors."""


class ShapeMismatchError(FsarError):
    """Operand shapes are incompatible."""


class ConfigurationError(FsarError):
    """Invalid configuration value or combination."""


class EmptySequenceError(FsarError):
    """An operation received a zero-length sequence."""


class DomainError(FsarError):
    """Argument outside the mathematical domain of the operation."""


class InconsistencyError(FsarError):
    """Inputs that must agree (counts, dims, keys) do not."""


class CapacityError(FsarError):
    """Dataset too small for the requested episode protocol."""


class EvaluationError(FsarError):
    """A numeric evaluation produced a non-finite result."""


class DivergenceError(FsarError):
    """Training loss became non-finite."""

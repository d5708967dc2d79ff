"""Exception taxonomy shared by every module."""


class GaborwaveError(Exception):
    """Base class for all library errors."""


class DimensionError(GaborwaveError):
    """Operand shapes are incompatible with the requested operation."""


class ParameterError(GaborwaveError):
    """An argument value is outside its documented domain."""


class ContractError(GaborwaveError):
    """A call violates an API contract (wrong mode, wrong tape, non-scalar loss)."""


class NumericError(GaborwaveError):
    """A computation produced non-finite or degenerate values."""


class BuildError(GaborwaveError):
    """A layer graph cannot be assembled into a runnable model."""

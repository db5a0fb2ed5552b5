"""Exception hierarchy; the CLI maps InputError to exit 2 and NumericalError to exit 3."""

from typing import Optional


class IslError(Exception):
    """Base class for every error raised by the library."""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual

    @property
    def name(self) -> str:
        return type(self).__name__


class InputError(IslError, ValueError):
    """The caller handed in something that violates a documented precondition."""


class NumericalError(IslError, ArithmeticError):
    """A computation could not be carried out to the required accuracy."""


class NotHermitian(InputError):
    pass


class TraceNotOne(InputError):
    pass


class NotPSD(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class MatrixShapeError(InputError):
    pass


class InvalidRate(InputError):
    pass


class InvalidFidelity(InputError):
    pass


class TimeDependentGenerator(InputError):
    pass


class UnsupportedGenerator(InputError):
    pass


class DegenerateState(InputError):
    pass


class ConfigError(InputError):
    pass


class StepTooLarge(NumericalError):
    pass


class CorrectionBudgetExceeded(NumericalError):
    pass


class DegenerateBound(NumericalError):
    pass


class ConsistencyError(NumericalError):
    pass

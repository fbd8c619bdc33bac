"""Exception hierarchy.

Usage and input problems derive from :class:`InputError`; failures of the
numerics themselves derive from :class:`NumericalError`.  The CLI maps the two
families to exit codes 2 and 3.
"""


class FreqSwapError(Exception):
    pass


class InputError(FreqSwapError, ValueError):
    pass


class NumericalError(FreqSwapError, ArithmeticError):
    pass


class GridTooNarrowError(InputError):
    pass


class GridTooCoarseError(InputError):
    pass


class HeraldOffGridError(InputError):
    pass


class NormalizationError(InputError):
    pass


class DimensionMismatchError(InputError):
    pass


class UnknownPortError(InputError):
    pass


class DegenerateDataError(InputError):
    pass


class JsiFormatError(InputError):
    """Malformed JSI or interferogram file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NegativeIntensityError(JsiFormatError):
    pass


class DecompositionError(NumericalError):
    pass


class BudgetExceededError(NumericalError):
    pass


class ZeroHeraldError(NumericalError):
    pass


class NonConvergenceError(NumericalError):
    pass

"""Exception hierarchy.

Every error raised by the package derives from :class:`ConfDistError`. The
``exit_code`` attribute is what the command-line front end returns.
"""


class ConfDistError(Exception):
    exit_code = 4


class DataError(ConfDistError):
    """Inputs violate a documented precondition."""

    exit_code = 3


class ParameterError(DataError, ValueError):
    pass


class DomainError(DataError, ValueError):
    pass


class InsufficientSampleError(DataError):
    pass


class DegenerateSampleError(DataError):
    pass


class ShapeError(DataError, ValueError):
    pass


class FeasibilityError(DataError):
    pass


class UnsupportedOperationError(ConfDistError):
    exit_code = 3


class NumericalError(ConfDistError, ArithmeticError):
    exit_code = 4


class NormalizationError(NumericalError):
    pass


class DegenerateModelError(NumericalError):
    pass


class CapacityError(NumericalError):
    pass

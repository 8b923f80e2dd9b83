"""Exception types raised across the package."""


class MatLDAError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MatLDAError, ValueError):
    """Input failed validation (shape mismatch, empty class, bad parameter)."""


class DegenerateDirectionError(MatLDAError, ValueError):
    """The fitted direction has zero projection on the class-mean difference."""


class DegenerateDataError(MatLDAError, ValueError):
    """Data carry no usable signal, e.g. all responses equal."""


class DivergenceError(MatLDAError, ArithmeticError):
    """The solver produced a non-finite objective."""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite objective at iteration {iteration}")


class DataFileError(MatLDAError, ValueError):
    """A data file is missing or malformed."""

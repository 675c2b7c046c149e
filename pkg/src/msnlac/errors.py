"""Exception types shared across the package.

The CLI maps these onto exit codes: InputError -> 2, EvaluationError -> 3,
NumericalError -> 4.
"""


class MsnlacError(Exception):
    """Base class for all package errors."""


class InputError(MsnlacError):
    """Bad file, bad format, or a violated precondition on user input."""


class EvaluationError(MsnlacError):
    """Mask/ground-truth mismatch during evaluation."""


class NumericalError(MsnlacError):
    """Non-convergence or a non-finite value in an iterative computation."""

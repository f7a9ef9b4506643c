"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes: parameter/usage problems
exit 2, data and precondition violations exit 3, numerical failures
exit 4.
"""


class VbmaError(Exception):
    """Base class for all package errors."""


class ParameterError(VbmaError, ValueError):
    """Invalid argument or configuration value."""


class DataError(VbmaError, ValueError):
    """Data violates a model precondition (e.g. posterior-existence checks)."""


class SingularModelError(VbmaError):
    """Selected covariate columns are numerically rank-deficient."""


class NumericalError(VbmaError, ArithmeticError):
    """A non-finite value appeared during iteration; message names the term."""

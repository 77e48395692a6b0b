"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: ConfigError -> 1,
DataError -> 2, NumericalError -> 3.
"""


class SvrplError(Exception):
    """Base class for all package errors."""


class ConfigError(SvrplError):
    """Invalid configuration, arguments, or usage."""


class DataError(SvrplError):
    """Malformed or missing input data."""


class NumericalError(SvrplError):
    """Numerical failure: non-convergence, non-finite values, failed checks."""


class SubproblemError(NumericalError):
    """Subproblem solver exhausted its iteration budget.

    Carries the best primal/dual pair found so callers can inspect how
    close the solve got.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best

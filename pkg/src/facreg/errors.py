"""Exception hierarchy shared across the package.

Numerical failures (solver non-convergence, degenerate factors/columns)
are kept separate from input problems so callers can map them to distinct
exit codes.
"""

from __future__ import annotations


class FacregError(Exception):
    """Base class for all package errors."""


class InputError(FacregError, ValueError):
    """Invalid argument, configuration value, or malformed matrix input."""


class DataError(FacregError):
    """A data file could not be parsed (carries row/column location)."""


class NumericalError(FacregError):
    """Base class for numerical failures during estimation."""


class ConvergenceError(NumericalError):
    """Solver hit its iteration cap.

    Carries the last iterate so callers can inspect or resume.
    """

    def __init__(self, message, last_iterate=None, sweeps=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.sweeps = sweeps


class DegenerateFactorError(NumericalError):
    """Requested factor count exceeds the numerically identifiable rank."""


class DegenerateColumnError(NumericalError):
    """One or more design columns have (near-)zero second moment."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(int(i) for i in indices)

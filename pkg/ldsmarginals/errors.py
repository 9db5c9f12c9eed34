"""Exception hierarchy for ldsmarginals.

Every error raised on purpose by the library derives from
LdsMarginalsError, so the command-line layer can report library failures
without hiding genuine programming errors. Precondition failures also
derive from ValueError for callers that only care about bad input.
"""
from __future__ import annotations


class LdsMarginalsError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(LdsMarginalsError, ValueError):
    """An argument violates a documented precondition."""


class BudgetExceededError(InvalidArgumentError):
    """A point set would exceed the configured point budget."""


class ConfigError(InvalidArgumentError):
    """An experiment configuration has unknown keys or invalid values."""


class DisjointSupportError(InvalidArgumentError):
    """Two densities being compared share no common support."""


class ConvergenceError(LdsMarginalsError):
    """The mode search or Hessian regularization failed."""


class FitError(LdsMarginalsError):
    """A least-squares fit or normalization could not be completed."""


class StageError(LdsMarginalsError):
    """A failure inside one stage of an experiment run."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

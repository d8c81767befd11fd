"""Exception types shared across the package."""


class LocalCovError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(LocalCovError):
    """Operands are defined on different time grids or have wrong shapes."""


class DomainError(LocalCovError):
    """An input value is outside the mathematically valid domain."""


class IllConditionedError(LocalCovError):
    """A linear system is singular or numerically unusable without a penalty."""


class ConvergenceError(LocalCovError):
    """An iterative solver did not converge within its iteration budget."""

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class DegenerateVarianceError(LocalCovError):
    """The estimated variance at the terminal time is not positive."""


class UnsupportedScenarioError(LocalCovError):
    """A closed-form oracle was requested outside the scenario that admits it."""


class InputError(LocalCovError):
    """An input set is empty or otherwise structurally unusable."""

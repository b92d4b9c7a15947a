"""Exception types shared across the package."""


class HarqestError(Exception):
    """Base class for package errors."""


class ConfigError(HarqestError):
    """Invalid or inconsistent configuration input."""


class ModelError(HarqestError):
    """A model object violates its mathematical preconditions."""


class ConvergenceError(HarqestError):
    """An iterative routine failed to converge within its budget."""


class DepthError(HarqestError):
    """A cost ladder cannot be extended to the requested depth."""

    def __init__(self, message, largest_safe_depth=None):
        super().__init__(message)
        self.largest_safe_depth = largest_safe_depth

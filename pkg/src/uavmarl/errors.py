"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """A configuration is inconsistent or infeasible."""


class UsageError(RuntimeError):
    """An API was called in a state that does not allow it."""

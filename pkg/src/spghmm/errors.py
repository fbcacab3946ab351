"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """Invalid run configuration (step-size exponent, block structure, dims)."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class DegeneracyError(FloatingPointError):
    """A recursion hit a time step where every state has zero probability."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t

"""Exception types shared across the package."""


class InputError(ValueError):
    """Bad argument: wrong dimension, non-member point, invalid parameter."""


class ConfigError(ValueError):
    """Invalid or incomplete run configuration.

    ``path`` names the offending field (``"scenario.constraints[0].a"``).
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericalError(ArithmeticError):
    """An iterative routine failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message if residual is None else f"{message} (residual={residual:.3e})")


class SequencingError(RuntimeError):
    """Solver state was driven out of order (wrong slot, decision at t=0)."""

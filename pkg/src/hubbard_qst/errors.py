"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An input value violates a documented bound."""


class SizeLimitError(ValueError):
    """A dense or tensor representation would exceed a configured cap."""


class IntegrationError(RuntimeError):
    """A time integrator failed to reach its convergence target."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual

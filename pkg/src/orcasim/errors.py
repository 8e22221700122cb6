"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    pass


class ResolutionError(ValueError):
    """Time grid too coarse for the fastest dynamics in the problem."""


class NumericalInstabilityError(RuntimeError):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state at time step {step}")


class FitError(RuntimeError):
    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (last residual norm {residual:.4g})"
        super().__init__(message)


class DegeneracyError(FitError):
    pass


class CalibrationError(RuntimeError):
    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


class PreconditionError(RuntimeError):
    pass


class InsufficientDataError(ValueError):
    pass


class RangeError(ValueError):
    pass


class IntegrationError(RuntimeError):
    pass


class ConfigError(ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")

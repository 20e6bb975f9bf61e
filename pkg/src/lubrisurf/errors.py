"""Exception types shared across the package."""


class LubrisurfError(Exception):
    pass


class ConfigError(LubrisurfError, ValueError):
    """Invalid parameters or run configuration."""


class DomainError(LubrisurfError, ValueError):
    """Argument outside the domain of a constitutive law."""


class PositivityError(LubrisurfError, ValueError):
    """A field that must stay strictly positive does not."""


class ConvergenceError(LubrisurfError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class StepRejected(LubrisurfError):
    """A time step produced a field value at or below the positivity floor.

    Not a failure: the integrator halves dt and retries.
    """

    def __init__(self, field, index, value):
        self.field = field
        self.index = int(index)
        self.value = float(value)
        super().__init__(f"{field}[{self.index}] = {self.value:.3e} below positivity floor")

"""Exception types raised by the solvers and the experiment harness."""


class MalformedFieldError(ValueError):
    """A spectral field violates conjugate symmetry or has the wrong shape."""


class ConfigError(ValueError):
    """An experiment or solver configuration failed validation."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class CFLError(ConfigError):
    """A time step guard (nudging CFL or dispersive Δt ≲ Δx²) was violated."""


class DivergenceError(RuntimeError):
    """The integration produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ResolutionError(RuntimeError):
    """The reference spectrum is not resolved down to round-off at the dealias cutoff."""


class UndefinedFitError(ValueError):
    """An exponential fit was requested on a window without positive samples."""

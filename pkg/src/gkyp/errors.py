"""Exception types raised across the toolkit."""


class GkypError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(GkypError, ValueError):
    pass


class NotHermitian(GkypError, ValueError):
    pass


class NotPsd(GkypError, ValueError):
    pass


class InvalidBand(GkypError, ValueError):
    pass


class SingularFrequency(GkypError):
    """``j*omega*I - A`` is numerically singular at the requested frequency."""

    def __init__(self, omega, smin):
        super().__init__(f"jwI - A is singular at w={omega!r} (sigma_min={smin:.3e})")
        self.omega = omega
        self.smin = smin


class AllFrequenciesSingular(GkypError):
    pass


class StepTooLarge(GkypError, ValueError):
    pass


class HorizonExhausted(GkypError):
    pass


class SingularShift(GkypError):
    pass


class GenerationFailed(GkypError):
    pass


class NumericalFailure(GkypError):
    """Raised when a solver result cannot be used to decide anything."""


class UncontrollableWarning(UserWarning):
    pass

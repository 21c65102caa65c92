"""Exception hierarchy shared by all sblab modules."""


class SBLabError(Exception):
    """Base class for every error raised by sblab."""


class ValidationError(SBLabError, ValueError):
    """Invalid user-supplied parameters or configuration."""


class GapViolation(ValidationError):
    """e1 - e0 lies on the boson mass lattice m*N."""


class MassOrderViolation(ValidationError):
    """The boson mass is not below the excited level, so no scattering channel is open."""


class NumericalError(SBLabError, ArithmeticError):
    """A numerical routine could not deliver a trustworthy result."""


class ToleranceNotMet(NumericalError):
    """Adaptive quadrature exhausted its subdivision budget.

    The best available estimate is attached as ``value`` and ``error``.
    """

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class PoleOnBoundary(ValidationError):
    pass


class NumeratorDiscontinuous(NumericalError):
    pass


class BelowThreshold(ValidationError):
    pass


class SupportAtOrigin(ValidationError):
    pass


class WindowTooNarrow(NumericalError):
    pass


class InvalidGrid(ValidationError):
    pass


class DimensionOverflow(NumericalError):
    pass


class EigensolverFailure(NumericalError):
    pass


class ContourCrossesSpectrum(NumericalError):
    pass


class EtaTooSmall(ValidationError):
    pass


class SupportTouchesBoundary(ValidationError):
    pass


class EmptyCutoffRange(NumericalError):
    pass


class EpsBelowSpacingFloor(ValidationError):
    pass

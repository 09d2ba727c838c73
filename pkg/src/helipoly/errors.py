"""Exception types raised across the package."""


class HelipolyError(ValueError):
    """Base class for every error raised by helipoly."""


class NotTimeLike(HelipolyError):
    """A vector expected on the upper sheet of H^2 is not future time-like."""


class LightLikeAxis(HelipolyError):
    pass


class DegenerateAxis(HelipolyError):
    pass


class VertexPoint(HelipolyError):
    """The tangent of a polygon is undefined at a vertex."""


class BadDiscretization(HelipolyError):
    pass


class NotDivisible(HelipolyError):
    pass


class TooFewNodes(HelipolyError):
    pass


class BlowUp(HelipolyError):
    """Renormalization onto H^2 failed during time stepping."""


class EmptyWindow(HelipolyError):
    pass


class DomainError(HelipolyError):
    pass


class AsymptoteMismatch(HelipolyError):
    pass


class TooShort(HelipolyError):
    pass


class UnknownExperiment(HelipolyError):
    pass

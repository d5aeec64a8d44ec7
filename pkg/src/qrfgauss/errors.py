"""Exception types raised across the package."""


class QRFError(ValueError):
    """Base class for all errors raised by qrfgauss."""


class DuplicateLabel(QRFError):
    pass


class NonPositiveMass(QRFError):
    pass


class TooFewParticles(QRFError):
    pass


class DimensionMismatch(QRFError):
    pass


class NonSymmetric(QRFError):
    pass


class UnknownLabel(QRFError, KeyError):
    def __str__(self):
        return ValueError.__str__(self)


UnknownParticle = UnknownLabel


class ZeroVarianceCorrelation(QRFError):
    pass


class InvalidNuRange(QRFError):
    pass


class SameFrame(QRFError):
    pass


class InvalidFrameChoice(QRFError):
    pass


class FrameMismatch(QRFError):
    pass


class FrameOverlapsPair(QRFError):
    pass


class OddDimension(QRFError):
    pass


class NonPositiveDeterminant(QRFError):
    pass


class DegenerateTriangle(QRFError):
    pass


class UnsupportedDimension(QRFError):
    pass


class GridTooCoarse(QRFError):
    pass


class InterpolationOutOfRange(QRFError):
    pass


class DifferentiationUnstable(QRFError):
    pass


class NotPure(QRFError):
    pass


class ScenarioParseError(QRFError):
    """Malformed scenario document; ``field`` names the offending location."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class ActionError(QRFError):
    def __init__(self, index, cause):
        super().__init__(f"action[{index}]: {type(cause).__name__}: {cause}")
        self.index = index
        self.cause = cause

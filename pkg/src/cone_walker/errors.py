"""Exception hierarchy shared by every module."""


class ConeWalkerError(Exception):
    """Base class for all library errors."""


class ModelError(ConeWalkerError, ValueError):
    pass


class NonZeroDrift(ModelError):
    pass


class DegenerateSupport(ModelError):
    pass


class SingularCovariance(ModelError):
    pass


class ConeError(ConeWalkerError, ValueError):
    pass


class DimensionMismatch(ConeError):
    pass


class PointOutsideCone(ConeError):
    pass


class StartOutsideCone(PointOutsideCone):
    pass


class UnsupportedTransform(ConeError):
    pass


class NoClosedForm(ConeWalkerError):
    pass


class SeriesNotConverged(ConeWalkerError, ArithmeticError):
    pass


class FitDiverged(ConeWalkerError, ArithmeticError):
    pass


class NonPositiveValue(ConeWalkerError, ValueError):
    pass


class MixedResidueError(ConeWalkerError, ValueError):
    """Raised when a periodic series is fitted across several residue classes."""


class EmptyGrid(ConeWalkerError, ValueError):
    pass


class ConfigError(ConeWalkerError):
    pass


class VerificationFailure(ConeWalkerError):
    pass

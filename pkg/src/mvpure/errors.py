"""Exception hierarchy shared by every module."""


class MvpureError(Exception):
    """Base class for all library errors."""


class NotSymmetric(MvpureError, ValueError):
    pass


class NotPositiveDefinite(MvpureError, ValueError):
    def __init__(self, message, smallest_eigenvalue=None):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class RankOutOfBounds(MvpureError, ValueError):
    pass


class DimensionMismatch(MvpureError, ValueError):
    pass


class SingularCovariance(MvpureError, ValueError):
    pass


class RankDeficientLeadfield(MvpureError, ValueError):
    pass


class CompositeRankDeficient(RankDeficientLeadfield):
    pass


class MissingQ(MvpureError, ValueError):
    pass


class PatchRankOutOfBounds(RankOutOfBounds):
    pass


class InsufficientSamples(MvpureError, ValueError):
    pass


class SourceOnSensor(MvpureError, ValueError):
    pass


class DegenerateLeadfield(MvpureError, ValueError):
    pass


class InvalidSpectrum(MvpureError, ValueError):
    pass


class PerturbationEscapesHead(MvpureError, ValueError):
    pass


class StabilizationFailed(MvpureError, RuntimeError):
    pass


class UnstableModel(MvpureError, ValueError):
    pass


class IllConditionedRegression(MvpureError, ValueError):
    pass


class ZeroColumn(MvpureError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class ZeroPowerReference(MvpureError, ValueError):
    pass


class EmptyResults(MvpureError, ValueError):
    pass


class ConfigError(MvpureError, ValueError):
    pass

"""Exception hierarchy shared by every module of the package."""


class ElasticaError(Exception):
    """Base class for all package errors."""


class InvalidWeightError(ElasticaError, ValueError):
    pass


class DimensionError(ElasticaError, ValueError):
    pass


class NotArcLengthError(ElasticaError, ValueError):
    pass


class InsufficientResolutionError(ElasticaError, ValueError):
    pass


class InfeasibleError(ElasticaError):
    """Boundary data admit no curve (or no candidate of the requested kind)."""


class ProjectionError(ElasticaError, ValueError):
    pass


class DegenerateExtractionError(ElasticaError):
    pass


class NotEvaluableError(ElasticaError):
    pass


class InconsistentCertificateError(ElasticaError):
    pass


class SingularStateError(ElasticaError):
    pass


class CoordinateBreakdownError(ElasticaError):
    pass


class StepSizeError(ElasticaError):
    pass


class DomainError(ElasticaError, ValueError):
    pass


class InvalidBlueprintError(ElasticaError, ValueError):
    pass


class InconclusiveError(ElasticaError):
    pass


class ConvergenceWarning(UserWarning):
    pass

"""Exception hierarchy shared by all streamcov modules."""


class StreamCovError(Exception):
    """Base class for every error raised by streamcov."""


# -- network -----------------------------------------------------------------

class NetworkError(StreamCovError, ValueError):
    pass


class Disconnected(NetworkError):
    pass


class SelfEdge(NetworkError):
    pass


class MultiEdge(NetworkError):
    pass


class NonpositiveLength(NetworkError):
    pass


class NonpositiveOmega(NetworkError):
    pass


class NotATree(NetworkError):
    pass


class BadOutlet(NetworkError):
    pass


class InvalidPoint(NetworkError):
    pass


class SingularLaplacian(NetworkError):
    pass


class NotDirected(NetworkError):
    pass


class FlowUnconnectedPair(NetworkError):
    pass


# -- scalar functions and models ---------------------------------------------

class InvalidParams(StreamCovError, ValueError):
    pass


class OutOfDomainParam(InvalidParams):
    pass


class ConstraintViolation(InvalidParams):
    """A parameter violates a named inequality, e.g. ``0 <= beta <= 1``."""


class DeltaTooSmallForTree(ConstraintViolation):
    pass


class HypothesisViolation(InvalidParams):
    pass


class UnknownVariant(StreamCovError, ValueError):
    pass


class UnknownParam(StreamCovError, ValueError):
    pass


class QuadratureFailure(StreamCovError, ArithmeticError):
    pass


class Divergent(QuadratureFailure):
    pass


# -- inference ---------------------------------------------------------------

class NotPositiveDefinite(StreamCovError, ArithmeticError):
    pass


class DimensionMismatch(StreamCovError, ValueError):
    pass


class RankDeficientDesign(StreamCovError, ValueError):
    pass


class NonConvergence(StreamCovError, RuntimeError):
    pass


class NonpositiveSd(StreamCovError, ValueError):
    pass

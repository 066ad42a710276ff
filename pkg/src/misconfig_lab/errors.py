"""Exception hierarchy shared by the whole package."""


class MisconfigLabError(Exception):
    """Base class for every error raised by this package."""


class GraphError(MisconfigLabError, ValueError):
    pass


class DisconnectedRouters(GraphError):
    pass


class RoleViolation(GraphError):
    pass


class DanglingDst(GraphError):
    pass


class InfeasibleParams(MisconfigLabError, ValueError):
    pass


class ParseError(MisconfigLabError, ValueError):
    pass


class EmptyGraph(GraphError):
    pass


class MissingWeight(MisconfigLabError, KeyError):
    pass


class NoRoute(MisconfigLabError, ValueError):
    pass


class UnreachableDst(MisconfigLabError):
    pass


class UnknownPair(MisconfigLabError, KeyError):
    pass


class InsufficientCandidates(MisconfigLabError):
    pass


class LengthMismatch(MisconfigLabError, ValueError):
    pass


class BadDelta(MisconfigLabError, ValueError):
    pass


class EmptyDelta(MisconfigLabError, ValueError):
    pass


class DimMismatch(MisconfigLabError, ValueError):
    pass


class UnknownType(MisconfigLabError, KeyError):
    pass


class IsolatedNode(MisconfigLabError, ValueError):
    pass


class NonFiniteLoss(MisconfigLabError, FloatingPointError):
    pass


class Diverged(NonFiniteLoss):
    pass


class ShapeMismatch(MisconfigLabError, ValueError):
    pass

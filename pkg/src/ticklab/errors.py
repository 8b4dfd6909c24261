"""Exception hierarchy shared by all ticklab modules."""


class TickLabError(ValueError):
    """Base class for every error raised by ticklab."""


class SingularMatrix(TickLabError):
    pass


class BranchCutHit(TickLabError):
    pass


class BlockMismatch(TickLabError):
    pass


class NonUnitary(TickLabError):
    pass


class TooShort(TickLabError):
    pass


class InvariantViolation(TickLabError):
    pass


class NegativeProbability(TickLabError):
    pass


class NeverTicks(TickLabError):
    pass


class NoConvergence(TickLabError):
    pass


class RouteMismatch(TickLabError):
    pass


class DegenerateParams(TickLabError):
    pass

"""Exception hierarchy shared by all modules."""


class KhError(ValueError):
    """Base class for every error raised by this package."""


class BaseMismatch(KhError):
    pass


class ShapeMismatch(KhError):
    pass


class DomainError(KhError):
    pass


class NotSuborthonormal(KhError):
    pass


class NotContraction(KhError):
    pass


class NotSelfAdjoint(KhError):
    pass


class ConvergenceFailure(KhError):
    pass


class NotIntertwining(KhError):
    pass


class UnknownGenerator(KhError):
    pass


class InvalidMarkov(KhError):
    pass


class BottomMismatch(KhError):
    pass


class EquivarianceViolation(KhError):
    pass


class NotSingleGenerator(KhError):
    pass


class NotCylinder(KhError):
    pass


class ParseError(KhError):
    pass


class ValidationError(KhError):
    """Invalid system description; ``invariant`` names what was violated."""

    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        self.detail = detail
        msg = invariant if not detail else f"{invariant}: {detail}"
        super().__init__(msg)

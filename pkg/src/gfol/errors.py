"""Exception hierarchy shared by all modules."""


class GfolError(Exception):
    """Base class for every error raised by the package."""


class ParseError(GfolError):
    pass


class ValidationError(GfolError):
    """A model invariant failed; carries the invariant name and its residual."""

    def __init__(self, invariant, residual, detail=""):
        self.invariant = invariant
        self.residual = float(residual)
        msg = f"{invariant} violated (residual {self.residual:.3e})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class UnknownModel(GfolError):
    pass


class BadParams(GfolError):
    pass


class DegenerateMetric(GfolError):
    pass


class NotCompatible(GfolError):
    pass


class KindMismatch(GfolError):
    pass


class StructureError(GfolError):
    """Precondition failure while building a structure."""


class NonCommuting(StructureError):
    pass


class SingularQ(StructureError):
    pass


class NotSkewInFrame(StructureError):
    pass


class FlowError(GfolError):
    pass


class SingularMetric(FlowError):
    pass


class PositivityLost(FlowError):
    pass


class PoleReached(FlowError):
    pass


class NotPositive(FlowError):
    pass


class NotConverged(FlowError):
    pass


class BlowupDetected(FlowError):
    pass


class InsufficientSamples(FlowError):
    pass

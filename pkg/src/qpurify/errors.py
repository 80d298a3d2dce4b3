"""Exception hierarchy.

Every error raised by the package derives from :class:`QPurifyError`, which
is itself a :class:`ValueError` so that callers doing plain input checking
keep working.
"""


class QPurifyError(ValueError):
    """Base class for all package errors."""


class NumericalInvariantError(QPurifyError):
    """A computed quantity violated an invariant that holds analytically."""


# core
class NotSquare(QPurifyError):
    pass


class NotHermitian(QPurifyError):
    pass


class NotPSD(QPurifyError):
    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class TraceNotOne(QPurifyError):
    pass


class NotProjector(QPurifyError):
    pass


class NotUnitary(QPurifyError):
    pass


class NotOrthonormal(QPurifyError):
    pass


class DimensionMismatch(QPurifyError):
    pass


class CompletenessViolation(QPurifyError):
    pass


class UnknownOutcomeLabel(QPurifyError, KeyError):
    pass


class NumericalInconsistency(NumericalInvariantError):
    pass


# trajectory
class AllOutcomesZeroProbability(NumericalInvariantError):
    pass


class NormalizationDrift(NumericalInvariantError):
    pass


class SupportViolation(QPurifyError):
    pass


class FilterDegenerate(NumericalInvariantError):
    pass


# analysis / darkspace / rates
class EnumerationTooLarge(QPurifyError):
    pass


class StateTooPure(QPurifyError):
    pass


class ViolationFound(NumericalInvariantError):
    def __init__(self, message, state=None, p=None, margin=None):
        super().__init__(message)
        self.state = state
        self.p = p
        self.margin = margin


class RankTooSmall(QPurifyError):
    pass


class DimensionNotTwo(QPurifyError):
    pass


class NonPositiveSeries(QPurifyError):
    pass


# models
class DimensionCapExceeded(QPurifyError):
    pass


class ParamOutOfRange(QPurifyError):
    pass


class InvalidProbabilities(QPurifyError):
    pass

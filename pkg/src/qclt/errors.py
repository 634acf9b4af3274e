"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map it without a lookup
table: 1 for bad input, 2 for numerical failure.
"""


class QcltError(Exception):
    exit_code = 2


class InvalidInput(QcltError):
    exit_code = 1


class NumericalFailure(QcltError):
    exit_code = 2


# input validation
class NonHermitian(InvalidInput):
    pass


class NegativeEigenvalue(InvalidInput):
    pass


class BadTrace(InvalidInput):
    pass


class NotCentered(InvalidInput):
    pass


class UnsupportedCovariance(InvalidInput):
    pass


class NotPositiveDefinite(InvalidInput):
    pass


class IndexOutOfSector(InvalidInput):
    pass


class RouteUnavailable(InvalidInput):
    pass


class InfiniteBeta(InvalidInput):
    pass


class NoValidDensity(InvalidInput):
    pass


class InsufficientOrder(InvalidInput):
    pass


class DegenerateFit(InvalidInput):
    pass


class SpecError(InvalidInput):
    """Malformed state spec, n-grid or data file."""


# numerical trouble
class ZeroMass(NumericalFailure):
    pass


class EigenFailure(NumericalFailure):
    pass


class SupportViolation(NumericalFailure):
    pass


class CutoffTooSmall(NumericalFailure):
    pass


class GridTooCoarse(NumericalFailure):
    pass


class NegativeMass(NumericalFailure):
    pass


class QuadratureDivergence(NumericalFailure):
    pass


class FitIllConditioned(NumericalFailure):
    pass

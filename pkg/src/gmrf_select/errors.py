"""Exception hierarchy. Every error raised by this package derives from GmrfSelectError."""


class GmrfSelectError(Exception):
    pass


# --- supported-matrix operations ---

class IndexOutOfSupport(GmrfSelectError):
    pass


class SingularComplement(GmrfSelectError):
    pass


class SingularMatrix(GmrfSelectError):
    pass


class SupportMismatch(GmrfSelectError):
    pass


# --- model construction and queries ---

class DisconnectedGraph(GmrfSelectError):
    pass


class SingularSubmatrix(GmrfSelectError):
    pass


class SingularObservationBlock(GmrfSelectError):
    pass


class DisconnectedFromS(GmrfSelectError):
    pass


class NotUnitRegular(GmrfSelectError):
    pass


class NotATree(GmrfSelectError):
    pass


class IndependentPairPresent(GmrfSelectError):
    pass


class InfeasibleParameters(GmrfSelectError):
    pass


class InvariantViolation(GmrfSelectError):
    pass


# --- exact search ---

class InstanceTooLarge(GmrfSelectError):
    pass


# --- tree decompositions and the DP ---

class InvalidDecomposition(GmrfSelectError):
    pass


class WidthMismatch(GmrfSelectError):
    pass


class EliminationOrderBroken(GmrfSelectError):
    pass


class OutOfGridRange(GmrfSelectError):
    pass


class EigenvalueOutOfRange(GmrfSelectError):
    pass


class RankDeficient(GmrfSelectError):
    pass


class StateSpaceExceeded(GmrfSelectError):
    pass


class NumericFailure(GmrfSelectError):
    pass


class EmptyTable(GmrfSelectError):
    pass


# --- file parsing ---

class ParseError(GmrfSelectError):
    pass

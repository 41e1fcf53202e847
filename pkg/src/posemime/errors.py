"""Exception types raised across the package.

Every error carries enough context to be rendered as a one-line message;
none of them wrap other exceptions silently.
"""


class PosemimeError(Exception):
    """Base class for all package errors."""


# --- skeleton -------------------------------------------------------------

class MissingKeypoint(PosemimeError):
    def __init__(self, part):
        self.part = part
        super().__init__(f"required keypoint not detected: {part.name}")


class DegenerateSpine(PosemimeError):
    pass


class DegenerateBone(PosemimeError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"zero-length bone {edge[0].name}->{edge[1].name}")


# --- manifold -------------------------------------------------------------

class SpecMismatch(PosemimeError):
    pass


class AntipodalPoint(PosemimeError):
    """Logarithm/transport undefined: points are (numerically) antipodal."""

    def __init__(self, factor_index, row=None):
        self.factor_index = factor_index
        self.row = row
        where = f"factor {factor_index}"
        if row is not None:
            where += f", point {row}"
        super().__init__(f"antipodal configuration at {where}")


class NoConvergence(PosemimeError):
    pass


# --- gmm ------------------------------------------------------------------

class SingularCovariance(PosemimeError):
    pass


class AllZeroDensity(PosemimeError):
    pass


class EmptyBin(PosemimeError):
    def __init__(self, bin_index, k):
        super().__init__(
            f"time bin {bin_index}/{k} received no points; "
            f"K={k} is too large for this data"
        )


class NonIncreasingLikelihood(PosemimeError):
    def __init__(self, iteration, previous, current):
        self.iteration = iteration
        super().__init__(
            f"EM objective dropped at iteration {iteration}: "
            f"{previous:.12g} -> {current:.12g}"
        )


class SingularTimeVariance(PosemimeError):
    pass


# --- scoring ----------------------------------------------------------------

class EmptySequence(PosemimeError):
    pass


class TooFewDemos(PosemimeError):
    pass


# --- ingestion --------------------------------------------------------------

class MalformedDocument(PosemimeError):
    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)


class LabelArityMismatch(PosemimeError):
    pass


class TooShort(PosemimeError):
    pass


class NonMonotoneTimestamps(PosemimeError):
    pass


class MalformedLine(PosemimeError):
    pass


class WrongKeypointArity(PosemimeError):
    def __init__(self, got):
        super().__init__(f"expected 14 keypoint entries, got {got}")


class NegativeTimestamp(PosemimeError):
    pass


# --- session ----------------------------------------------------------------

class IllegalTransition(PosemimeError):
    def __init__(self, stage, command):
        self.stage = stage
        self.command = command
        super().__init__(f"command {command} is illegal in stage {stage.name}")


class UnknownGesture(PosemimeError):
    def __init__(self, gesture_id):
        self.gesture_id = gesture_id
        super().__init__(f"unknown gesture id: {gesture_id!r}")


class NoGestureSelected(PosemimeError):
    pass


class CorruptRecord(PosemimeError):
    def __init__(self, line_number, reason=""):
        self.line_number = line_number
        message = f"corrupt session log record at line {line_number}"
        if reason:
            message += f": {reason}"
        super().__init__(message)

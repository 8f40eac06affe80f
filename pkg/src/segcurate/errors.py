"""Exception types shared across the toolkit."""


class SegcurateError(Exception):
    """Base class for all toolkit errors."""


# -- mask codec / geometry ---------------------------------------------------

class RleError(SegcurateError):
    pass


class RunSumMismatch(RleError):
    pass


class InteriorZeroRun(RleError):
    pass


class EmptyMask(SegcurateError):
    pass


class InvalidGridSize(SegcurateError):
    pass


class ShapeMismatch(SegcurateError):
    pass


# -- curation ----------------------------------------------------------------

class RegionTooSmall(SegcurateError):
    pass


class InsufficientGold(SegcurateError):
    pass


class MissingCategoryStats(SegcurateError):
    pass


# -- losses ------------------------------------------------------------------

class SpatialLossSkip(SegcurateError):
    """Signal (not a failure): exclude the attention loss for this sample."""


class SkipNoForeground(SpatialLossSkip):
    pass


class SkipNoBackground(SpatialLossSkip):
    pass


class NoBackground(SegcurateError):
    pass


class NonFiniteComponent(SegcurateError):
    pass


class OutOfRange(SegcurateError):
    pass


class EmptyAfterIgnore(SegcurateError):
    pass


class TargetOutOfVocab(SegcurateError):
    pass


# -- matching ----------------------------------------------------------------

class TooFewCandidates(SegcurateError):
    pass


# -- metrics -----------------------------------------------------------------

class EmptyAccumulator(SegcurateError):
    pass


class ZeroUnion(SegcurateError):
    pass


class UnknownBucketLabel(SegcurateError):
    pass


# -- dataset -----------------------------------------------------------------

class EmptyInstruction(SegcurateError):
    pass


# -- qa generation -----------------------------------------------------------

class QaGenError(SegcurateError):
    pass


class UnknownMode(QaGenError):
    pass


class MissingCategory(QaGenError):
    pass


class UnexpectedCategory(QaGenError):
    pass


class TransportError(QaGenError):
    pass


class NonOkStatus(QaGenError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"generation endpoint returned status {status}")
        self.status = status
        self.body = body


class ParseFailure(QaGenError):
    """Response could not be parsed; ``raw`` keeps the text for review."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


# -- review service ----------------------------------------------------------

class ReviewError(SegcurateError):
    pass


class NoWork(ReviewError):
    """Queue is empty; a signal, not a failure."""


class NotLeasedToYou(ReviewError):
    pass


class AlreadyDecided(ReviewError):
    pass


class RubricVerdictMismatch(ReviewError):
    pass


class InvalidFraction(ReviewError):
    pass


class UnknownItem(ReviewError):
    pass

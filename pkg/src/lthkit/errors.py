"""Exception types raised across the toolkit.

Everything derived from :class:`ToolkitError` is a *data* problem (bad file,
incompatible shapes, missing labels).  The CLI maps these to exit code 3.
"""


class ToolkitError(Exception):
    pass


class MalformedHeader(ToolkitError):
    pass


class DimensionMismatch(ToolkitError):
    pass


class NonFiniteValue(ToolkitError):
    pass


class IoFailure(ToolkitError):
    pass


class MalformedLine(ToolkitError):
    def __init__(self, path, lineno: int, reason: str):
        self.path = str(path)
        self.lineno = lineno
        self.reason = reason
        super().__init__(f"{self.path}:{lineno}: {reason}")


class DuplicateId(ToolkitError):
    pass


class OverflowToInfinity(ToolkitError):
    pass


class NormalizationOfZero(ToolkitError):
    pass


class NotDivisible(ToolkitError):
    pass


class TooFewTrainingPoints(ToolkitError):
    pass


class EmptyIndex(ToolkitError):
    pass


class DimensionNotByteAligned(ToolkitError):
    pass


class UnknownCandidateId(ToolkitError):
    pass


class MissingMarginLabel(ToolkitError):
    pass


class DivergedLoss(ToolkitError):
    pass


class UnknownPassageId(ToolkitError):
    pass


class NotEnoughCandidates(ToolkitError):
    pass


class MissingScore(ToolkitError):
    pass


class InvalidTriplet(ToolkitError):
    pass


class EmptyPassage(ToolkitError):
    pass


class EmptyQrels(ToolkitError):
    pass


class EmptyQuerySet(ToolkitError):
    pass


class RankDeficient(UserWarning):
    """PCA found fewer non-negligible eigenvalues than requested components."""

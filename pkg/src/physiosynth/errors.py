"""Exception hierarchy.

``ValidationError`` subclasses signal bad user input (CLI exit code 1);
everything else deriving from ``PhysioSynthError`` is a runtime failure
(exit code 2).
"""


class PhysioSynthError(Exception):
    pass


class ValidationError(PhysioSynthError, ValueError):
    pass


# scenario / profile
class OverlapError(ValidationError):
    pass


class EmptyScenarioError(ValidationError):
    pass


class RangeError(ValidationError):
    pass


class OutOfRangeError(ValidationError):
    pass


# bvh
class BVHSyntaxError(ValidationError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class ChannelMismatchError(ValidationError):
    pass


class MissingSectionError(ValidationError):
    pass


class UnknownActionError(ValidationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class SkeletonMismatchError(ValidationError):
    pass


class DegenerateChannelError(PhysioSynthError):
    pass


# numerics
class TooShortError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class EmptyDatasetError(ValidationError):
    pass


class UntrainedError(PhysioSynthError):
    pass


class LambdaZeroError(ValidationError):
    pass


class OriginError(PhysioSynthError):
    pass


class BandError(ValidationError):
    pass


class AllZeroError(PhysioSynthError):
    pass


class NoBeatsError(PhysioSynthError):
    pass


class TooFewBeatsError(PhysioSynthError):
    pass


class MissingWeightsError(PhysioSynthError):
    pass

"""Exception hierarchy shared by every module of the package."""


class CosetShiftError(Exception):
    """Base class for all errors raised by this package."""


# group construction -------------------------------------------------------

class GroupError(CosetShiftError, ValueError):
    pass


class DuplicateElementError(GroupError):
    pass


class NoIdentityError(GroupError):
    pass


class NoInverseError(GroupError):
    pass


class NonAssociativeError(GroupError):
    pass


class NotAutomorphismError(GroupError):
    pass


# shifts -------------------------------------------------------------------

class ShiftError(CosetShiftError, ValueError):
    pass


class SizeLimitError(ShiftError):
    pass


class NotAWordError(ShiftError):
    pass


class NotStabilizedError(ShiftError):
    pass


# group shifts and coding --------------------------------------------------

class GroupShiftError(CosetShiftError, ValueError):
    pass


class NotProductClosedError(GroupShiftError):
    pass


class IdentityLoopMissingError(GroupShiftError):
    pass


class NotSurjectiveError(GroupShiftError):
    pass


class NotSeparatingError(GroupShiftError):
    pass


class NotSameCosetError(GroupShiftError):
    pass


class SpliceNotAWordError(GroupShiftError):
    pass


# reduction ----------------------------------------------------------------

class DecompositionError(CosetShiftError, RuntimeError):
    pass


class NotASubgroupError(DecompositionError):
    pass


class PreconditionK1Error(DecompositionError):
    pass


class PreconditionK2Error(DecompositionError):
    pass


class SplitVerificationFailedError(DecompositionError):
    pass


class AmbiguousAmalgamationError(DecompositionError):
    pass


class IterationLimitError(DecompositionError):
    pass


# countable graphs ---------------------------------------------------------

class WanderingError(CosetShiftError, ValueError):
    pass


class EmptyTruncationError(WanderingError):
    pass


class BadCertificateError(WanderingError):
    pass


class RadiusTooSmallError(WanderingError):
    pass


class RuleError(WanderingError):
    pass


# spec files ---------------------------------------------------------------

class SpecError(CosetShiftError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)


class SpecSyntaxError(SpecError):
    pass


class UnresolvedReferenceError(SpecError):
    pass


class SectionInvalidError(SpecError):
    pass

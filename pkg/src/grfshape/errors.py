"""Exception types shared across the package.

``ValidationError`` subclasses signal bad inputs or violated preconditions
(CLI exit code 2); everything else raised at runtime maps to exit code 3.
"""


class GrfError(Exception):
    """Base class for all library errors."""


class ValidationError(GrfError):
    """Invalid inputs or violated preconditions."""


# -- grid model -------------------------------------------------------------

class DuplicateOffset(ValidationError):
    pass


class OppositeOffsetPresent(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class UnknownOffset(ValidationError):
    pass


# -- exact oracle -----------------------------------------------------------

class DomainTooLarge(ValidationError):
    pass


class MissingAppearance(ValidationError):
    pass


class IncompatibleModels(ValidationError):
    pass


# -- sampler ----------------------------------------------------------------

class OutOfDomain(ValidationError):
    pass


class ClampConflict(ValidationError):
    pass


# -- appearance -------------------------------------------------------------

class InvalidLabel(ValidationError):
    pass


class ChannelMismatch(ValidationError):
    pass


class EmptyAssignmentWarning(UserWarning):
    """A label received zero pixels during an appearance update."""


# -- learning ---------------------------------------------------------------

class IncompatibleStatistics(ValidationError):
    pass


# -- structure estimation ---------------------------------------------------

class CandidateInStructure(ValidationError):
    pass


class RangeExhausted(ValidationError):
    pass


# -- composition ------------------------------------------------------------

class MappingMismatch(ValidationError):
    pass


class IncompatibleIndexing(ValidationError):
    pass


class IncompatibleDomains(ValidationError):
    pass


# -- file formats -----------------------------------------------------------

class MalformedHeader(ValidationError):
    pass


class LabelOutOfRange(ValidationError):
    pass


class PlacementFailure(GrfError):
    """A synthetic scene could not be laid out without overlap."""

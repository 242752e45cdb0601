"""Exception hierarchy shared by all fbtl modules."""


class FbtlError(Exception):
    """Base class for all library errors."""


class ParameterError(FbtlError, ValueError):
    """Invalid parameter combination for a generator or formula."""


class DomainError(FbtlError, ValueError):
    """An index or value lies outside the admissible domain."""


class BasisError(FbtlError, ValueError):
    """The designated basis rows are (numerically) rank deficient."""


class SpanError(FbtlError, ValueError):
    """Some item is not in the span of the basis items."""


class DegenerateError(FbtlError, ValueError):
    """A matrix is all zero or a probability sits at 0 or 1."""


class NoSolutionError(FbtlError):
    """A homogeneous system has only the trivial solution."""


class AmbiguityError(FbtlError):
    """A homogeneous system has a nullspace of dimension two or more.

    ``matching`` carries the Hall-condition diagnosis for the system.
    """

    def __init__(self, message, matching=None, nullity=None):
        super().__init__(message)
        self.matching = matching
        self.nullity = nullity


class SizeError(FbtlError):
    """A subset enumeration would exceed its budget."""


class OutOfScopeError(FbtlError):
    """The requested family has no supported closed form."""


class InputError(FbtlError, ValueError):
    """Empty or malformed estimator input."""


class NoInformationError(FbtlError):
    """The comparison data carry no information about the scores."""


class ParseError(FbtlError, ValueError):
    """A data file could not be parsed."""


class ConfigError(FbtlError, ValueError):
    """An experiment configuration or schedule is invalid."""


class OutputError(FbtlError, OSError):
    """Results could not be written."""

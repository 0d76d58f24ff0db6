"""Exception and warning types shared across the package."""


class CsqptError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(CsqptError):
    """Objects with incompatible Fock dimensions were combined."""


class ValidationError(CsqptError):
    """An argument violates a documented precondition."""


class NotAChannelError(CsqptError):
    """A Kraus set or Choi matrix fails the CPTP requirements."""


class DataQualityError(CsqptError):
    """A dataset is malformed or fails a quality gate."""


class NumericalConsistencyError(CsqptError):
    """Two redundant computations of the same quantity disagree."""


class RetractionError(CsqptError):
    """The Stiefel retraction could not produce an isometry."""


class TruncationWarning(UserWarning):
    """A state or operator lost non-negligible weight to Fock truncation."""

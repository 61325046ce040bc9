"""Exception and warning classes raised across the package."""


class CondSteinError(Exception):
    """Base class for all package errors."""


class ValidationError(CondSteinError, ValueError):
    """An input object violates its invariants."""


class MixedModeError(ValidationError):
    """Families cannot be placed on a common finite support."""


class DomainError(ValidationError):
    """A point lies outside the domain of a Stein operator."""


class BoundaryError(ValidationError):
    """A test function violates the boundary convention of its class."""


class EssentialRangeError(ValidationError):
    """An auxiliary value lies outside the essential range of the model."""


class GridMismatchError(ValidationError):
    """A joint table cannot be matched against the model grid."""


class MarginalMismatchError(ValidationError):
    """The observed auxiliary marginal differs from the model marginal."""


class FamilyError(ValidationError):
    """A perturbation does not apply to the family kinds present."""


class SizeError(ValidationError):
    """Problem exceeds the desk-scale size cap of an exact oracle."""


class SpecParseError(ValidationError):
    """A model/joint/h specification could not be parsed."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class QuadratureError(CondSteinError, ArithmeticError):
    """Adaptive quadrature failed to reach tolerance within its budget."""


class OverflowGuardError(CondSteinError, ArithmeticError):
    """A solution value is not representable even in its stable form."""


class EmptyBinWarning(UserWarning):
    """Some bins received no samples during y-binning."""


class OutOfRangeWarning(UserWarning):
    """Samples fell outside the binning range and were dropped."""

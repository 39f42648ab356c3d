"""Exception hierarchy shared by all modules."""


class SteinbergBarError(Exception):
    """Base class for every error raised by this package."""


class MalformedInputError(SteinbergBarError, ValueError):
    """Input data has the wrong shape, mixed moduli or unparsable encoding."""


class DomainError(SteinbergBarError, ValueError):
    """An operation was called outside the range where it is defined."""


class DegenerateApartmentError(SteinbergBarError, ValueError):
    """The vectors of an apartment do not form a basis."""


class InvalidProductError(SteinbergBarError, ValueError):
    """The two factors of a product do not live on independent subspaces."""


class InconsistentComplexError(SteinbergBarError, ArithmeticError):
    """Composable boundary maps do not compose to zero."""


class InvariantViolation(SteinbergBarError, AssertionError):
    """An internal invariant that must always hold was broken."""

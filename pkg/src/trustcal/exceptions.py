"""Exception hierarchy shared across the package."""


class TrustCalError(Exception):
    """Base class for all package errors."""


class InvalidArmError(TrustCalError, ValueError):
    """An opinion or chosen arm is not a member of the arm set."""


class InvalidRecordError(TrustCalError, ValueError):
    """A trial record is inconsistent with the arm set or dataset schema."""


class ShapeError(TrustCalError, ValueError):
    """A context vector has the wrong dimension for a policy."""


class SchemaError(TrustCalError):
    """A data file or manifest does not match the expected columns."""


class RowValidationError(TrustCalError):
    """A data row failed validation.

    ``row`` is the 1-based data row index (the header is not counted).
    """

    def __init__(self, row, message):
        super().__init__(f"row {row}: {message}")
        self.row = row


class EmptyInputError(TrustCalError, ValueError):
    pass


class InsufficientDataError(TrustCalError, ValueError):
    pass

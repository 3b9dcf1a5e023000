class CerberusError(Exception):
    """Base class for all package errors."""


class EncodingError(CerberusError, ValueError):
    """Record field cannot be encoded canonically."""


class ValidationError(CerberusError, ValueError):
    """Input violates a domain invariant."""


class ParseError(CerberusError, ValueError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class PolicyError(CerberusError):
    """Signatures or roles do not satisfy the permission rules."""


class NotFoundError(CerberusError, LookupError):
    pass


class RevocationError(CerberusError):
    """Revocation call refers to an unknown document or process."""

"""Error taxonomy shared across the package.

Every failure a caller can act on maps to one of these; the CLI turns them
into exit codes and the service turns them into HTTP 4xx responses.
"""


class RefexError(Exception):
    """Base class for all package errors."""


class SchemaError(RefexError):
    """An artifact file or payload violates its schema."""


class IntegrityError(RefexError):
    """Cross-references between records do not resolve (dangling ids, page mismatches)."""


class InputError(RefexError):
    """An operation received arguments outside its contract."""


class ConflictError(RefexError):
    """Mutually incompatible records, e.g. overlapping entities at BIO conversion."""


class AlignmentError(RefexError):
    """Subword predictions cannot be aligned back onto OCR tokens."""

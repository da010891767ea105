"""Exception hierarchy shared across the service, store, and CLI.

Each class maps to one wire error code (see ``http.py``) and one CLI exit
class, so callers can branch on type instead of parsing messages.
"""


class NudgeLabError(Exception):
    """Base class for all errors raised by this package."""

    error_code = "internal_error"


class ValidationFailure(NudgeLabError):
    """Input violates a documented contract (bad field, malformed file)."""

    error_code = "validation_error"


class ConfigurationFailure(NudgeLabError):
    """Startup-time configuration is unusable (missing corpus, bad policy)."""

    error_code = "configuration_error"


class AuthenticationFailure(NudgeLabError):
    """Credentials or session token rejected."""

    error_code = "authentication_error"


class AuthorizationFailure(NudgeLabError):
    """Authenticated caller does not own the addressed resource."""

    error_code = "authorization_error"


class NotFoundFailure(NudgeLabError):
    """Addressed entity does not exist."""

    error_code = "not_found"


class ConflictFailure(NudgeLabError):
    """State transition already happened with different parameters."""

    error_code = "conflict"


class ExpiredTokenFailure(NudgeLabError):
    """Intervention token passed its TTL before resolution."""

    error_code = "expired_token"


class DegenerateInputError(NudgeLabError):
    """Statistical input admits no well-defined answer (zero variance with
    unequal means)."""

    error_code = "degenerate_input"

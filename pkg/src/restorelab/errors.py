"""Exception hierarchy shared across the pipeline."""


class RestoreLabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigParseError(RestoreLabError):
    """Configuration document is not syntactically valid."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class ConfigValidationError(RestoreLabError):
    """Configuration document is well-formed but violates the schema."""


class StoreConflictError(RestoreLabError):
    """A finalized stage was written a second time."""


class IntegrityError(RestoreLabError):
    """A stored artifact no longer matches its recorded digest."""


class NotFoundError(RestoreLabError, LookupError):
    """A stage, artifact, or scene object does not exist."""


class BackendError(RestoreLabError):
    """A model backend failed or was unreachable."""


class BackendTimeoutError(RestoreLabError):
    """A model backend did not answer within the per-call timeout.

    Deliberately not a subclass of BackendError so callers can treat
    timeouts differently from hard failures.
    """


class ProtocolError(RestoreLabError):
    """A backend response or fixture record violates the wire contract."""

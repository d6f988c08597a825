"""Exception types shared across the package."""


class NocsError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(NocsError):
    """Invalid data or parameters.

    Carries a stable machine-readable ``code`` (e.g. ``"dimension_mismatch"``,
    ``"fully_masked"``) so callers can branch on the failure kind without
    parsing messages.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class InputError(NocsError):
    """Unreadable or unsupported input file (CLI exit code 2)."""

"""Exception types shared across the package."""


class GrsAuditError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(GrsAuditError, ValueError):
    """Invalid matrix shape, item count, or recommendation length."""


class TableParseError(GrsAuditError, ValueError):
    """Scenario table text does not conform to the table grammar."""


class UnknownItemError(GrsAuditError, ValueError):
    """A candidate list references an item the scenario does not contain."""


class DegenerateReferenceError(GrsAuditError, ValueError):
    """Reference scores are all zero, so no ideal ranking exists."""


class DegeneratePopulationError(GrsAuditError, ValueError):
    """Distance population has zero variance; thresholds are undefined."""


class UndefinedKappaError(GrsAuditError, ValueError):
    """Chance agreement is 1, so kappa is undefined."""


class RulesetError(GrsAuditError, ValueError):
    """Rule configuration is malformed."""


class TransportError(GrsAuditError, RuntimeError):
    """Endpoint request failed after exhausting the retry budget."""

    def __init__(self, message: str, last_status: int | None = None, attempts: int = 0):
        super().__init__(message)
        self.last_status = last_status
        self.attempts = attempts


class RunAbortedError(GrsAuditError, RuntimeError):
    """An experiment run could not proceed; carries the missing keys."""

    def __init__(self, message: str, missing: list[tuple[str, str]] | None = None):
        super().__init__(message)
        self.missing = missing or []

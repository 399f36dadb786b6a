"""Exception hierarchy shared by every module."""


class EmdScaleError(Exception):
    """Base class for all package errors."""


class DegenerateInputError(EmdScaleError, ValueError):
    """Input too short, empty, or otherwise unusable for the requested operation."""


class SingularFitError(EmdScaleError, ValueError):
    """Regression abscissae (or moments) have zero spread."""


class NotSiftableError(EmdScaleError):
    """Signal lacks the extrema needed to build both envelopes."""


class UndefinedPeriodError(EmdScaleError):
    """Component has no zero crossings, so its period is undefined."""


class InsufficientComponentsError(EmdScaleError):
    """Too few IMFs with a defined period to fit a scaling law."""


class EnsembleFailureError(EmdScaleError):
    """More Monte-Carlo replicates failed than the ensemble tolerates."""

    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)


class IngestionError(EmdScaleError, ValueError):
    """Input file could not be parsed or holds invalid prices."""

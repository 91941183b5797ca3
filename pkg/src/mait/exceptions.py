"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`MaitError`.
The CLI maps the three top-level families to exit codes.
"""


class MaitError(Exception):
    """Base class for all package errors."""


class ConfigError(MaitError):
    """Invalid or incomplete pipeline configuration (exit code 2)."""


class DataError(MaitError, ValueError):
    """Problem with the input data itself (exit code 3)."""


class SchemaError(DataError):
    """Header/column specification mismatch."""


class ParseError(DataError):
    """A cell could not be parsed according to its column kind."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class SplitError(DataError):
    pass


class AssociationError(DataError):
    pass


class ImputationError(DataError):
    pass


class PropagationError(DataError):
    pass


class SelectionError(DataError):
    pass


class FoldError(DataError):
    pass


class TranslationError(DataError):
    pass


class TrainingError(MaitError, ValueError):
    pass


class PredictionError(MaitError, ValueError):
    pass


class CalibrationError(MaitError, ValueError):
    pass


class ConformalError(MaitError, ValueError):
    pass


class AttributionError(MaitError, ValueError):
    pass

"""Exception types raised by the library.

Everything user-facing derives from ScorecastError so the CLI can map
failures onto exit codes without matching on message strings.
"""


class ScorecastError(Exception):
    """Base class for all library errors."""


class DataError(ScorecastError):
    """Bad input data: malformed files, invalid records, empty cohorts."""


class UsageError(ScorecastError):
    """Caller mistake: unknown names, bad flag values, shape mismatches."""


class NumericalError(ScorecastError):
    """Numerical failure: divergence, non-finite values, infeasible targets."""


class MissingFeatureError(DataError):
    """A computation required a feature that is absent on a record."""


class CsvFormatError(DataError):
    """A delimited file does not follow the documented schema."""


class ZeroVarianceError(NumericalError):
    """A correlation was requested for a constant input."""


class InfeasibleCorrelationError(NumericalError):
    """No valid factor loadings reproduce the requested correlation targets."""


class TrainingDivergedError(NumericalError):
    """A loss or parameter became non-finite during training."""


class CheckpointError(DataError):
    """A model checkpoint file is unreadable or structurally invalid."""

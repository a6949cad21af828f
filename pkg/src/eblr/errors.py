"""Exception types shared across the package."""


class EblrError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(EblrError, ValueError):
    """A column-role mapping or covariate schema is invalid."""


class DataError(EblrError, ValueError):
    """Input data violates a dataset invariant (parse/integrity errors)."""


class FitError(EblrError, ValueError):
    """A model cannot be fitted on the given inputs."""


class PredictionError(EblrError, ValueError):
    """Prediction inputs are incompatible with a fitted model."""


class MetricError(EblrError, ValueError):
    """A metric is undefined for the given inputs."""


class BacktestError(EblrError, ValueError):
    """The backtest protocol cannot be run on the given dataset."""


class ModelIOError(EblrError, ValueError):
    """A model file cannot be read or has an unsupported layout."""

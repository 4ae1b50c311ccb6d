"""Exception types shared across the package."""


class EvarsError(Exception):
    """Base class for all package errors."""


class SchemaError(EvarsError):
    """A required column or field is missing."""


class OrderingError(EvarsError):
    """Timestamps are not strictly increasing."""


class CsvParseError(EvarsError):
    """A cell could not be parsed as a number."""


class ImputationError(EvarsError):
    """A column has no observed values to impute from."""


class FeatureSpecError(EvarsError):
    """A feature specification is invalid for the dataset."""


class SplitError(EvarsError):
    """The offline/online split would violate its preconditions."""


class ConditioningError(EvarsError):
    """Cholesky factorization failed even after jitter escalation."""


class TuningError(EvarsError):
    """Model selection could not produce a usable candidate."""


class InputError(EvarsError):
    """An input value is non-finite or has the wrong shape."""


class CalibrationError(EvarsError):
    """Not enough data to calibrate a detector threshold."""


class HistoryError(EvarsError):
    """Not enough history for the output scaling factor."""


class DegenerateWindowError(EvarsError):
    """A scaling-factor denominator window sums to zero."""


class AugmentError(EvarsError):
    """Data augmentation could not be performed as requested."""


class ConfigError(EvarsError):
    """A configuration file or value is invalid."""


class ScenarioError(EvarsError):
    """A simulation scenario specification is invalid."""

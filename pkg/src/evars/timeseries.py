"""Data model for multivariate seasonal series: ingestion, imputation,
feature engineering and offline/online splitting."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .errors import (
    CsvParseError,
    FeatureSpecError,
    ImputationError,
    OrderingError,
    SchemaError,
    SplitError,
)

CALENDAR_FREQUENCIES = ("D", "W", "M", "Q")
INDEX_FREQUENCY = "index"

CALENDRIC_FEATURES = ("day_of_month", "weekday", "month", "quarter", "working_day")

# Which calendric features are meaningful at each sampling frequency.
_CALENDRIC_BY_FREQUENCY = {
    "D": frozenset(CALENDRIC_FEATURES),
    "W": frozenset({"month", "quarter"}),
    "M": frozenset({"month", "quarter"}),
    "Q": frozenset({"quarter"}),
    INDEX_FREQUENCY: frozenset(),
}


@dataclass(frozen=True)
class TimeSeriesDataset:
    """An aligned covariate matrix and target vector on a regular time grid.

    ``timestamps`` are integer period ordinals; for calendar frequencies they
    are pandas period ordinals so calendric information can be recovered.
    Missing cells are tracked by explicit masks and must be imputed before the
    dataset is used for modelling.
    """

    timestamps: np.ndarray
    covariates: np.ndarray
    target: np.ndarray
    season_length: int
    covariate_names: tuple[str, ...]
    frequency: str = INDEX_FREQUENCY
    covariate_missing: np.ndarray | None = None
    target_missing: np.ndarray | None = None
    calendric_names: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        timestamps = np.asarray(self.timestamps, dtype=np.int64)
        covariates = np.atleast_2d(np.asarray(self.covariates, dtype=float))
        target = np.asarray(self.target, dtype=float)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "covariates", covariates)
        object.__setattr__(self, "target", target)
        n = len(target)
        if covariates.shape[0] != n or len(timestamps) != n:
            raise SchemaError(
                f"row mismatch: {covariates.shape[0]} covariate rows, "
                f"{n} targets, {len(timestamps)} timestamps"
            )
        if covariates.shape[1] != len(self.covariate_names):
            raise SchemaError(
                f"{covariates.shape[1]} covariate columns but "
                f"{len(self.covariate_names)} names"
            )
        if n > 1:
            steps = np.diff(timestamps)
            if np.any(steps <= 0):
                raise OrderingError("timestamps must be strictly increasing")
            if len(set(steps.tolist())) > 1:
                raise OrderingError("timestamps must be equally spaced")
        if self.season_length < 2:
            raise SchemaError("season_length must be >= 2")
        if self.frequency not in _CALENDRIC_BY_FREQUENCY:
            raise SchemaError(f"unknown frequency {self.frequency!r}")
        self._check_finite()
        for arr in (timestamps, covariates, target):
            arr.setflags(write=False)

    def _check_finite(self):
        cov_ok = np.isfinite(self.covariates)
        if self.covariate_missing is not None:
            cov_ok |= self.covariate_missing
        tgt_ok = np.isfinite(self.target)
        if self.target_missing is not None:
            tgt_ok |= self.target_missing
        if not (cov_ok.all() and tgt_ok.all()):
            raise SchemaError("non-finite cell outside the missing mask")

    @property
    def n(self) -> int:
        return len(self.target)

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    @property
    def has_missing(self) -> bool:
        return bool(
            (self.covariate_missing is not None and self.covariate_missing.any())
            or (self.target_missing is not None and self.target_missing.any())
        )

    def periods(self) -> pd.PeriodIndex:
        if self.frequency == INDEX_FREQUENCY:
            raise FeatureSpecError("index-frequency dataset has no calendar periods")
        return pd.PeriodIndex.from_ordinals(self.timestamps, freq=self.frequency)

    def to_frame(self, timestamp_column: str = "timestamp",
                 target_column: str = "y") -> pd.DataFrame:
        if self.frequency == INDEX_FREQUENCY:
            ts = self.timestamps
        else:
            ts = self.periods().astype(str)
        frame = pd.DataFrame({timestamp_column: ts})
        for j, name in enumerate(self.covariate_names):
            frame[name] = self.covariates[:, j]
        frame[target_column] = self.target
        return frame

    def write_csv(self, path, timestamp_column: str = "timestamp",
                  target_column: str = "y") -> None:
        self.to_frame(timestamp_column, target_column).to_csv(path, index=False)


@dataclass(frozen=True)
class FeatureSpec:
    """Deterministic expansion of lagged, rolling and calendric features."""

    lags: tuple[int, ...] = ()
    seasonal_lags: tuple[int, ...] = ()
    rolling_windows: tuple[int, ...] = ()
    seasonal_rolling_windows: tuple[int, ...] = ()
    calendric: tuple[str, ...] = ()

    def __post_init__(self):
        for group in (self.lags, self.seasonal_lags, self.rolling_windows,
                      self.seasonal_rolling_windows):
            if any(v < 1 for v in group):
                raise FeatureSpecError("lags and window sizes must be >= 1")
        for name in self.calendric:
            if name not in CALENDRIC_FEATURES:
                raise FeatureSpecError(f"unknown calendric feature {name!r}")

    @property
    def feature_count(self) -> int:
        return (len(self.lags) + len(self.seasonal_lags)
                + 2 * len(self.rolling_windows)
                + 2 * len(self.seasonal_rolling_windows)
                + len(self.calendric))


def load_csv(path, target_column: str, timestamp_column: str,
             season_length: int = 2,
             frequency: str | None = None) -> TimeSeriesDataset:
    """Read a dataset from CSV, sorting rows by timestamp.

    Empty cells are flagged missing; any non-empty cell that fails numeric
    parsing raises with its row and column location.
    """
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    for column in (target_column, timestamp_column):
        if column not in raw.columns:
            raise SchemaError(f"column {column!r} not found in {path}")

    ts_strings = raw[timestamp_column].str.strip()
    if ts_strings.str.fullmatch(r"-?\d+").all():
        ordinals = ts_strings.astype(np.int64).to_numpy()
        freq = frequency or INDEX_FREQUENCY
        if freq != INDEX_FREQUENCY:
            # Integer periods anchored at ordinal zero of the given frequency.
            pass
    else:
        try:
            stamps = pd.to_datetime(ts_strings, format="ISO8601")
        except (ValueError, TypeError) as exc:
            raise CsvParseError(f"cannot parse timestamps: {exc}") from None
        freq = frequency or _infer_frequency(stamps)
        ordinals = pd.PeriodIndex(stamps, freq=freq).asi8

    order = np.argsort(ordinals, kind="stable")
    ordinals = ordinals[order]
    if len(ordinals) > 1 and np.any(np.diff(ordinals) == 0):
        raise OrderingError(f"duplicate timestamps in {path}")

    value_columns = [c for c in raw.columns if c != timestamp_column]
    values = {}
    missing = {}
    for column in value_columns:
        cells = raw[column].str.strip().to_numpy()[order]
        empty = np.array([c == "" for c in cells])
        parsed = np.full(len(cells), np.nan)
        for i, cell in enumerate(cells):
            if empty[i]:
                continue
            try:
                parsed[i] = float(cell)
            except ValueError:
                raise CsvParseError(
                    f"non-numeric cell {cell!r} at row {i}, column {column!r}"
                ) from None
        values[column] = parsed
        missing[column] = empty

    covariate_names = tuple(c for c in value_columns if c != target_column)
    covariates = np.column_stack([values[c] for c in covariate_names]) \
        if covariate_names else np.empty((len(ordinals), 0))
    covariate_missing = np.column_stack([missing[c] for c in covariate_names]) \
        if covariate_names else np.zeros((len(ordinals), 0), dtype=bool)
    return TimeSeriesDataset(
        timestamps=ordinals,
        covariates=covariates,
        target=values[target_column],
        season_length=season_length,
        covariate_names=covariate_names,
        frequency=freq,
        covariate_missing=covariate_missing,
        target_missing=missing[target_column],
    )


def _infer_frequency(stamps: pd.Series) -> str:
    inferred = pd.infer_freq(pd.DatetimeIndex(stamps.sort_values()))
    if inferred is None:
        raise OrderingError("cannot infer a regular frequency from timestamps")
    head = inferred.split("-")[0].rstrip("SE")
    for freq in CALENDAR_FREQUENCIES:
        if head.startswith(freq):
            return freq
    raise SchemaError(f"unsupported frequency {inferred!r}")


def impute_mean(dataset: TimeSeriesDataset) -> TimeSeriesDataset:
    """Replace every missing cell by the mean of its column's observed values."""
    covariates = np.array(dataset.covariates)
    target = np.array(dataset.target)
    if dataset.covariate_missing is not None:
        for j in range(dataset.d):
            mask = dataset.covariate_missing[:, j]
            if mask.all():
                raise ImputationError(
                    f"column {dataset.covariate_names[j]!r} has no observed values"
                )
            if mask.any():
                covariates[mask, j] = covariates[~mask, j].mean()
    if dataset.target_missing is not None:
        mask = dataset.target_missing
        if mask.all():
            raise ImputationError("target column has no observed values")
        if mask.any():
            target[mask] = target[~mask].mean()
    return replace(dataset, covariates=covariates, target=target,
                   covariate_missing=None, target_missing=None)


def _backfilled(column: np.ndarray, first_valid: int) -> np.ndarray:
    out = np.array(column)
    out[:first_valid] = out[first_valid]
    return out


def add_features(dataset: TimeSeriesDataset, spec: FeatureSpec) -> TimeSeriesDataset:
    """Append lagged, rolling and calendric covariate columns.

    Every generated value at row t is a function of rows strictly before t
    and of the timestamp at t. Rows before the first computable value are
    backfilled with that value to keep the row count fixed.
    """
    if dataset.has_missing:
        raise FeatureSpecError("impute missing values before feature generation")
    y = dataset.target
    n = dataset.n
    n_seas = dataset.season_length
    columns: list[np.ndarray] = []
    names: list[str] = []
    calendric_names: list[str] = []

    def add(name: str, values: np.ndarray, first_valid: int):
        if first_valid >= n:
            raise FeatureSpecError(f"feature {name!r} needs more than {n} rows")
        columns.append(_backfilled(values, first_valid))
        names.append(name)

    for lag in spec.lags:
        shifted = np.roll(y, lag)
        add(f"y_lag_{lag}", shifted, lag)
    for k in spec.seasonal_lags:
        lag = k * n_seas
        add(f"y_seasonal_lag_{k}", np.roll(y, lag), lag)
    for w in spec.rolling_windows:
        means = np.full(n, np.nan)
        maxes = np.full(n, np.nan)
        for t in range(w, n):
            window = y[t - w:t]
            means[t] = window.mean()
            maxes[t] = window.max()
        add(f"y_rolling_mean_{w}", means, w)
        add(f"y_rolling_max_{w}", maxes, w)
    for w in spec.seasonal_rolling_windows:
        means = np.full(n, np.nan)
        maxes = np.full(n, np.nan)
        start = w * n_seas
        for t in range(start, n):
            window = y[t - w * n_seas:t:n_seas]
            means[t] = window.mean()
            maxes[t] = window.max()
        add(f"y_seasonal_rolling_mean_{w}", means, start)
        add(f"y_seasonal_rolling_max_{w}", maxes, start)

    if spec.calendric:
        allowed = _CALENDRIC_BY_FREQUENCY[dataset.frequency]
        bad = [f for f in spec.calendric if f not in allowed]
        if bad:
            raise FeatureSpecError(
                f"calendric features {bad} undefined at frequency "
                f"{dataset.frequency!r}"
            )
        periods = dataset.periods()
        for feature in spec.calendric:
            if feature == "day_of_month":
                values = periods.day.to_numpy()
            elif feature == "weekday":
                values = periods.dayofweek.to_numpy()
            elif feature == "month":
                values = periods.month.to_numpy()
            elif feature == "quarter":
                values = periods.quarter.to_numpy()
            else:  # working_day
                values = (periods.dayofweek < 5).astype(int).to_numpy()
            columns.append(values.astype(float))
            names.append(feature)
            calendric_names.append(feature)

    covariates = np.column_stack([dataset.covariates] + columns) \
        if columns else dataset.covariates
    covariate_missing = dataset.covariate_missing
    if covariate_missing is not None and columns:
        # generated columns are always observed
        covariate_missing = np.column_stack(
            [covariate_missing, np.zeros((n, len(columns)), dtype=bool)])
    return replace(
        dataset,
        covariates=covariates,
        covariate_names=dataset.covariate_names + tuple(names),
        calendric_names=dataset.calendric_names + tuple(calendric_names),
        covariate_missing=covariate_missing,
    )


def split_offline_online(dataset: TimeSeriesDataset, offline_fraction: float
                         ) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """Split into the first floor(fraction * n) rows and the remainder."""
    if not 0.0 < offline_fraction < 1.0:
        raise SplitError("offline_fraction must lie in (0, 1)")
    n_off = int(np.floor(offline_fraction * dataset.n))
    if n_off == 0 or n_off == dataset.n:
        raise SplitError("both split parts must be non-empty")
    if n_off < 2 * dataset.season_length:
        raise SplitError(
            f"offline part ({n_off} rows) must cover at least two seasons "
            f"of length {dataset.season_length}"
        )
    return slice_rows(dataset, 0, n_off), slice_rows(dataset, n_off, dataset.n)


def require_observed(dataset: TimeSeriesDataset) -> TimeSeriesDataset:
    """Reject datasets with missing cells and drop the (then all-False)
    missing-value masks so downstream row operations need not carry them."""
    if dataset.has_missing:
        raise ImputationError("impute missing values first")
    if dataset.covariate_missing is None and dataset.target_missing is None:
        return dataset
    return replace(dataset, covariate_missing=None, target_missing=None)


def slice_rows(dataset: TimeSeriesDataset, start: int, stop: int
               ) -> TimeSeriesDataset:
    return replace(
        dataset,
        timestamps=dataset.timestamps[start:stop],
        covariates=dataset.covariates[start:stop],
        target=dataset.target[start:stop],
        covariate_missing=None if dataset.covariate_missing is None
        else dataset.covariate_missing[start:stop],
        target_missing=None if dataset.target_missing is None
        else dataset.target_missing[start:stop],
    )


def concat(first: TimeSeriesDataset, second: TimeSeriesDataset
           ) -> TimeSeriesDataset:
    if first.covariate_names != second.covariate_names:
        raise SchemaError("covariate names differ between parts")
    return replace(
        first,
        timestamps=np.concatenate([first.timestamps, second.timestamps]),
        covariates=np.vstack([first.covariates, second.covariates]),
        target=np.concatenate([first.target, second.target]),
        covariate_missing=None,
        target_missing=None,
    )

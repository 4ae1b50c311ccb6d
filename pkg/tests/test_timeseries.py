import numpy as np
import pytest

from evars.errors import (
    CsvParseError,
    FeatureSpecError,
    ImputationError,
    OrderingError,
    SchemaError,
    SplitError,
)
from evars.timeseries import (
    FeatureSpec,
    TimeSeriesDataset,
    add_features,
    concat,
    impute_mean,
    load_csv,
    split_offline_online,
)


def make_dataset(n=20, d=2, season=4, **kwargs):
    rng = np.random.default_rng(0)
    return TimeSeriesDataset(
        timestamps=np.arange(n),
        covariates=rng.normal(size=(n, d)),
        target=rng.normal(size=n),
        season_length=season,
        covariate_names=tuple(f"x{j}" for j in range(d)),
        **kwargs,
    )


class TestDatasetInvariants:
    def test_row_mismatch_rejected(self):
        with pytest.raises(SchemaError):
            TimeSeriesDataset(np.arange(3), np.zeros((2, 1)), np.zeros(3),
                              2, ("a",))

    def test_unequal_spacing_rejected(self):
        with pytest.raises(OrderingError):
            TimeSeriesDataset(np.array([0, 1, 3]), np.zeros((3, 1)),
                              np.zeros(3), 2, ("a",))

    def test_non_monotone_rejected(self):
        with pytest.raises(OrderingError):
            TimeSeriesDataset(np.array([0, 2, 1]), np.zeros((3, 1)),
                              np.zeros(3), 2, ("a",))

    def test_nan_outside_mask_rejected(self):
        with pytest.raises(SchemaError):
            TimeSeriesDataset(np.arange(3), np.zeros((3, 1)),
                              np.array([1.0, np.nan, 2.0]), 2, ("a",))


class TestLoadCsv:
    def test_basic_three_rows(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("date,temp,sales\n"
                        "2020-01-01,3.5,10\n2020-02-01,4.0,11\n"
                        "2020-03-01,4.5,12\n")
        ds = load_csv(path, target_column="sales", timestamp_column="date",
                      season_length=12)
        assert ds.n == 3 and ds.d == 1
        assert ds.frequency == "M"
        assert ds.target.tolist() == [10.0, 11.0, 12.0]

    def test_shuffled_rows_sorted(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("t,y\n3,30\n1,10\n2,20\n")
        ds = load_csv(path, target_column="y", timestamp_column="t")
        assert ds.timestamps.tolist() == [1, 2, 3]
        assert ds.target.tolist() == [10.0, 20.0, 30.0]

    def test_empty_cell_flagged_missing(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("t,temp,y\n1,3.0,10\n2,,11\n3,4.0,12\n")
        ds = load_csv(path, target_column="y", timestamp_column="t")
        assert ds.covariate_missing.sum() == 1
        assert ds.covariate_missing[1, 0]

    def test_missing_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("t,y\n1,10\n")
        with pytest.raises(SchemaError):
            load_csv(path, target_column="sales", timestamp_column="t")

    def test_non_numeric_cell_located(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("t,y\n1,10\n2,oops\n")
        with pytest.raises(CsvParseError, match="oops"):
            load_csv(path, target_column="y", timestamp_column="t")

    def test_duplicate_timestamps(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("t,y\n1,10\n1,11\n")
        with pytest.raises(OrderingError):
            load_csv(path, target_column="y", timestamp_column="t")


class TestImputeMean:
    def test_mean_of_observed(self):
        ds = make_dataset(n=3, d=1)
        cov = np.array([[1.0], [np.nan], [3.0]])
        ds = TimeSeriesDataset(np.arange(3), cov, np.zeros(3), 2, ("a",),
                               covariate_missing=np.isnan(cov))
        out = impute_mean(ds)
        assert out.covariates[:, 0].tolist() == [1.0, 2.0, 3.0]

    def test_no_missing_unchanged(self):
        ds = make_dataset()
        out = impute_mean(ds)
        np.testing.assert_array_equal(out.covariates, ds.covariates)
        np.testing.assert_array_equal(out.target, ds.target)

    def test_singleton_mean(self):
        cov = np.array([[np.nan], [5.0]])
        ds = TimeSeriesDataset(np.arange(2), cov, np.zeros(2), 2, ("a",),
                               covariate_missing=np.isnan(cov))
        out = impute_mean(ds)
        assert out.covariates[:, 0].tolist() == [5.0, 5.0]

    def test_all_missing_column(self):
        cov = np.array([[np.nan], [np.nan]])
        ds = TimeSeriesDataset(np.arange(2), cov, np.zeros(2), 2, ("a",),
                               covariate_missing=np.isnan(cov))
        with pytest.raises(ImputationError):
            impute_mean(ds)

    def test_idempotent(self):
        cov = np.array([[1.0], [np.nan], [4.0]])
        ds = TimeSeriesDataset(np.arange(3), cov, np.zeros(3), 2, ("a",),
                               covariate_missing=np.isnan(cov))
        once = impute_mean(ds)
        twice = impute_mean(once)
        np.testing.assert_array_equal(once.covariates, twice.covariates)


class TestAddFeatures:
    def base(self, y, season=2):
        n = len(y)
        return TimeSeriesDataset(np.arange(n), np.zeros((n, 1)),
                                 np.asarray(y, float), season, ("x0",))

    def test_lag_one(self):
        out = add_features(self.base([1, 2, 3, 4]), FeatureSpec(lags=(1,)))
        col = out.covariates[:, out.covariate_names.index("y_lag_1")]
        assert col.tolist() == [1.0, 1.0, 2.0, 3.0]  # warm-up backfilled

    def test_rolling_mean_strictly_past(self):
        out = add_features(self.base([1, 2, 3, 4]),
                           FeatureSpec(rolling_windows=(2,)))
        col = out.covariates[:, out.covariate_names.index("y_rolling_mean_2")]
        # window of the two values before row 2: mean(1, 2) = 1.5
        assert col[2] == 1.5
        assert col[3] == 2.5
        assert col[0] == col[1] == 1.5  # backfill with earliest computable

    def test_seasonal_lag(self):
        out = add_features(self.base([1, 2, 3, 4, 5, 6], season=2),
                           FeatureSpec(seasonal_lags=(1,)))
        col = out.covariates[:, out.covariate_names.index("y_seasonal_lag_1")]
        assert col[2:].tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_month_cycles(self):
        import pandas as pd
        ordinals = pd.period_range("2019-01", periods=24, freq="M").asi8
        ds = TimeSeriesDataset(ordinals, np.zeros((24, 1)), np.zeros(24),
                               12, ("x0",), frequency="M")
        out = add_features(ds, FeatureSpec(calendric=("month",)))
        col = out.covariates[:, out.covariate_names.index("month")]
        assert col.tolist() == list(range(1, 13)) * 2
        assert out.calendric_names == ("month",)

    def test_weekday_rejected_for_monthly(self):
        import pandas as pd
        ordinals = pd.period_range("2019-01", periods=6, freq="M").asi8
        ds = TimeSeriesDataset(ordinals, np.zeros((6, 1)), np.zeros(6),
                               3, ("x0",), frequency="M")
        with pytest.raises(FeatureSpecError):
            add_features(ds, FeatureSpec(calendric=("weekday",)))

    def test_lag_too_long(self):
        with pytest.raises(FeatureSpecError):
            add_features(self.base([1, 2, 3]), FeatureSpec(lags=(5,)))

    def test_feature_count_matches_spec(self):
        spec = FeatureSpec(lags=(1, 2), seasonal_lags=(1,),
                           rolling_windows=(2,))
        out = add_features(self.base(list(range(1, 11))), spec)
        assert out.d == 1 + spec.feature_count

    def test_leakage_free(self):
        y = list(range(1, 13))
        spec = FeatureSpec(lags=(1,), rolling_windows=(2,),
                           seasonal_lags=(1,))
        base = add_features(self.base(y), spec)
        perturbed_y = list(y)
        perturbed_y[8] = 99.0
        perturbed = add_features(self.base(perturbed_y), spec)
        np.testing.assert_array_equal(base.covariates[8],
                                      perturbed.covariates[8])


class TestSplit:
    def test_80_20(self):
        ds = make_dataset(n=100, season=4)
        off, on = split_offline_online(ds, 0.8)
        assert (off.n, on.n) == (80, 20)

    def test_too_few_seasons(self):
        ds = make_dataset(n=10, season=5)
        with pytest.raises(SplitError):
            split_offline_online(ds, 0.8)

    def test_195_rows(self):
        ds = make_dataset(n=195, season=52)
        off, on = split_offline_online(ds, 0.8)
        assert (off.n, on.n) == (156, 39)

    def test_concat_recovers_original(self):
        ds = make_dataset(n=50, season=4)
        off, on = split_offline_online(ds, 0.8)
        back = concat(off, on)
        np.testing.assert_array_equal(back.target, ds.target)
        np.testing.assert_array_equal(back.covariates, ds.covariates)
        np.testing.assert_array_equal(back.timestamps, ds.timestamps)


class TestRequireObserved:
    def test_missing_values_rejected(self):
        from evars.timeseries import require_observed
        ds = make_dataset(n=10)
        from dataclasses import replace
        mask = np.zeros((10, ds.d), dtype=bool)
        mask[3, 0] = True
        with pytest.raises(ImputationError):
            require_observed(replace(ds, covariate_missing=mask))

    def test_all_false_masks_dropped(self):
        from evars.timeseries import require_observed
        from dataclasses import replace
        ds = make_dataset(n=10)
        masked = replace(ds,
                         covariate_missing=np.zeros((10, ds.d), dtype=bool),
                         target_missing=np.zeros(10, dtype=bool))
        out = require_observed(masked)
        assert out.covariate_missing is None and out.target_missing is None
        np.testing.assert_array_equal(out.target, ds.target)

    def test_feature_columns_extend_masks(self):
        from dataclasses import replace
        ds = make_dataset(n=30)
        masked = replace(ds,
                         covariate_missing=np.zeros((30, ds.d), dtype=bool))
        out = add_features(masked, FeatureSpec(lags=(1,)))
        assert out.covariate_missing.shape == (30, ds.d + 1)
        assert not out.covariate_missing[:, -1].any()

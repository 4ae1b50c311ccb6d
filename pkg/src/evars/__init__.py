"""Online seasonal time-series forecasting with change-point-triggered,
augmentation-backed refitting of a Gaussian process regression model."""

from .augment import AugmentParams, build_refit_dataset, scale_dataset
from .cpd import (
    BocpdState,
    ChangeFinderState,
    DetectorConfig,
    DriftDetector,
    SdarState,
    calibrate_cf_threshold,
    seasonal_difference,
)
from .engine import EvarsConfig, EvarsState, output_scaling_factor, run_online
from .simulate import ScenarioSpec, generate_scenario, manipulation_factor
from .timeseries import (
    FeatureSpec,
    TimeSeriesDataset,
    add_features,
    impute_mean,
    load_csv,
    split_offline_online,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentParams", "build_refit_dataset", "scale_dataset", "BocpdState",
    "ChangeFinderState", "DetectorConfig", "DriftDetector", "SdarState",
    "calibrate_cf_threshold", "seasonal_difference", "EvarsConfig",
    "EvarsState", "output_scaling_factor", "run_online", "ScenarioSpec",
    "generate_scenario", "manipulation_factor", "FeatureSpec",
    "TimeSeriesDataset", "add_features", "impute_mean", "load_csv",
    "split_offline_online", "__version__",
]

"""Construction of the refit dataset: target scaling, Gaussian-noise
oversampling and SMOGN, driven by a relevance split into normal and rare
cases plus random undersampling."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import gaussian_kde

from .errors import AugmentError, ConfigError, InputError
from .timeseries import TimeSeriesDataset

log = logging.getLogger(__name__)

GN_NOISE_FRACTION = 0.02  # noise std as a fraction of each column's std


class EmptyRareSetError(AugmentError):
    """The relevance split produced no rare cases; caller should fall back
    to plain target scaling."""


@dataclass(frozen=True)
class AugmentParams:
    method: str = "scale"  # scale | gn | smogn
    append_scaled: bool = False
    gn_oversample_percent: float = 100.0
    gn_undersample_percent: float = 100.0
    gn_relevance_threshold: float = 0.8
    smogn_relevance_threshold: float = 0.8
    smogn_boxplot_coefficient: float = 1.5
    smogn_undersample: bool = True
    smogn_k_neighbors: int = 5
    smogn_max_distance_rule: str = "half_median_knn"
    max_samples: int = 10_000

    def __post_init__(self):
        if self.method not in ("scale", "gn", "smogn"):
            raise ConfigError(f"unknown augmentation method {self.method!r}")
        if self.gn_oversample_percent < 0 or self.gn_undersample_percent < 0:
            raise ConfigError("percentages must be >= 0")
        for thr in (self.gn_relevance_threshold, self.smogn_relevance_threshold):
            if not 0.0 < thr < 1.0:
                raise ConfigError("relevance thresholds must lie in (0, 1)")
        if self.smogn_k_neighbors < 1:
            raise ConfigError("k_neighbors must be >= 1")
        if self.smogn_max_distance_rule != "half_median_knn":
            raise ConfigError(
                f"unknown distance rule {self.smogn_max_distance_rule!r}"
            )
        if self.max_samples < 1:
            raise ConfigError("max_samples must be >= 1")


@dataclass(frozen=True)
class AugmentedDataset:
    """Rows for model refitting; timestamps may repeat after augmentation."""

    timestamps: np.ndarray
    covariates: np.ndarray
    target: np.ndarray
    season_length: int
    covariate_names: tuple[str, ...]
    calendric_names: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.target)

    @property
    def d(self) -> int:
        return self.covariates.shape[1]


def _as_rows(dataset) -> AugmentedDataset:
    return AugmentedDataset(
        timestamps=np.asarray(dataset.timestamps),
        covariates=np.asarray(dataset.covariates, float),
        target=np.asarray(dataset.target, float),
        season_length=dataset.season_length,
        covariate_names=tuple(dataset.covariate_names),
        calendric_names=tuple(dataset.calendric_names),
    )


def scale_dataset(history: TimeSeriesDataset, eta: float) -> TimeSeriesDataset:
    """Multiply targets by eta; covariates and timestamps unchanged."""
    if not np.isfinite(eta) or eta <= 0:
        raise InputError(f"scaling factor must be positive, got {eta}")
    return replace(history, target=history.target * eta)


def relevance(targets) -> np.ndarray:
    """Relevance in [0, 1], inversely proportional to the estimated target
    density, so extreme targets score near 1."""
    y = np.asarray(targets, dtype=float)
    if len(y) < 5:
        raise InputError(f"need at least 5 targets, got {len(y)}")
    if np.ptp(y) == 0:
        return np.zeros(len(y))
    density = gaussian_kde(y, bw_method="silverman")(y)
    return 1.0 - density / density.max()


def relevance_boxplot(targets, coefficient: float) -> np.ndarray:
    """Relevance ramping linearly from 0 at the median to 1 at the boxplot
    fences (quartiles +/- coefficient * IQR)."""
    y = np.asarray(targets, dtype=float)
    if len(y) < 5:
        raise InputError(f"need at least 5 targets, got {len(y)}")
    q1, median, q3 = np.percentile(y, [25, 50, 75])
    iqr = q3 - q1
    if iqr == 0:
        return np.zeros(len(y))
    low = q1 - coefficient * iqr
    high = q3 + coefficient * iqr
    rel = np.zeros(len(y))
    above = y > median
    if high > median:
        rel[above] = np.clip((y[above] - median) / (high - median), 0.0, 1.0)
    below = y < median
    if median > low:
        rel[below] = np.clip((median - y[below]) / (median - low), 0.0, 1.0)
    return rel


def _column_stds(rows: AugmentedDataset) -> tuple[np.ndarray, float]:
    return rows.covariates.std(axis=0), float(rows.target.std())


def _calendric_mask(rows: AugmentedDataset) -> np.ndarray:
    return np.array([name in rows.calendric_names
                     for name in rows.covariate_names])


def _gn_sample(rows: AugmentedDataset, seed_idx: int,
               cov_std: np.ndarray, y_std: float, calendric: np.ndarray,
               rng: np.random.Generator) -> tuple[np.ndarray, float]:
    cov = np.array(rows.covariates[seed_idx])
    numeric = ~calendric
    cov[numeric] += rng.normal(0.0, GN_NOISE_FRACTION * cov_std[numeric])
    for j in np.flatnonzero(calendric):
        # Nominal columns: draw proportional to their observed frequency.
        cov[j] = rng.choice(rows.covariates[:, j])
    target = rows.target[seed_idx] + rng.normal(0.0, GN_NOISE_FRACTION * y_std)
    return cov, float(target)


def _assemble(rows: AugmentedDataset, keep_idx: np.ndarray,
              new_ts: list, new_cov: list, new_y: list) -> AugmentedDataset:
    timestamps = np.concatenate([rows.timestamps[keep_idx],
                                 np.asarray(new_ts, dtype=rows.timestamps.dtype)])
    covariates = np.vstack([rows.covariates[keep_idx]] + [np.asarray(new_cov)]) \
        if new_cov else np.array(rows.covariates[keep_idx])
    target = np.concatenate([rows.target[keep_idx], np.asarray(new_y, float)])
    order = np.argsort(timestamps, kind="stable")
    return replace(rows, timestamps=timestamps[order],
                   covariates=covariates[order], target=target[order])


def _split_rare(rows: AugmentedDataset, rel: np.ndarray, threshold: float
                ) -> tuple[np.ndarray, np.ndarray]:
    rare = np.flatnonzero(rel >= threshold)
    normal = np.flatnonzero(rel < threshold)
    if len(rare) == 0:
        raise EmptyRareSetError("relevance split produced no rare cases")
    return rare, normal


def _undersample(normal: np.ndarray, percent: float,
                 rng: np.random.Generator) -> np.ndarray:
    keep = int(np.ceil(percent / 100.0 * len(normal)))
    keep = min(keep, len(normal))
    chosen = rng.choice(normal, size=keep, replace=False) if keep else \
        np.array([], dtype=int)
    return np.sort(chosen)


def gn_augment(base, params: AugmentParams, seed: int) -> AugmentedDataset:
    """Gaussian-noise oversampling of rare cases plus random undersampling
    of normal cases."""
    rows = _as_rows(base)
    if rows.n < 5:
        raise AugmentError(f"need at least 5 rows, got {rows.n}")
    rng = np.random.default_rng(seed)
    rel = relevance(rows.target)
    rare, normal = _split_rare(rows, rel, params.gn_relevance_threshold)
    kept_normal = _undersample(normal, params.gn_undersample_percent, rng)
    n_new = int(round(params.gn_oversample_percent / 100.0 * len(rare)))

    cov_std, y_std = _column_stds(rows)
    calendric = _calendric_mask(rows)
    new_ts, new_cov, new_y = [], [], []
    for _ in range(n_new):
        seed_idx = int(rng.choice(rare))
        cov, target = _gn_sample(rows, seed_idx, cov_std, y_std, calendric, rng)
        new_ts.append(rows.timestamps[seed_idx])
        new_cov.append(cov)
        new_y.append(target)
    keep_idx = np.sort(np.concatenate([kept_normal, rare]))
    return _assemble(rows, keep_idx, new_ts, new_cov, new_y)


def smoter_interpolate(cov_seed, cov_neighbor, y_seed: float,
                       y_neighbor: float, z_seed, z_neighbor,
                       frac: float) -> tuple[np.ndarray, float]:
    """SMOTER child: covariates linearly interpolated at ``frac``, target
    the inverse-distance weighted average of the parents (distances in the
    standardized covariate space)."""
    cov = np.array(cov_seed + frac * (np.asarray(cov_neighbor) - cov_seed))
    zc = z_seed + frac * (np.asarray(z_neighbor) - z_seed)
    d_seed = float(np.linalg.norm(zc - z_seed))
    d_nb = float(np.linalg.norm(zc - np.asarray(z_neighbor)))
    if d_seed == 0.0:
        target = y_seed
    elif d_nb == 0.0:
        target = y_neighbor
    else:
        w_seed, w_nb = 1.0 / d_seed, 1.0 / d_nb
        target = (w_seed * y_seed + w_nb * y_neighbor) / (w_seed + w_nb)
    return cov, float(target)


def smogn_augment(base, params: AugmentParams, seed: int) -> AugmentedDataset:
    """One synthetic sample per rare seed: interpolation against a random
    rare neighbor when it lies within the maximum distance, Gaussian noise
    otherwise."""
    rows = _as_rows(base)
    if rows.n < 5:
        raise AugmentError(f"need at least 5 rows, got {rows.n}")
    rng = np.random.default_rng(seed)
    rel = relevance_boxplot(rows.target, params.smogn_boxplot_coefficient)
    rare, normal = _split_rare(rows, rel, params.smogn_relevance_threshold)
    if len(rare) < params.smogn_k_neighbors + 1:
        log.info("rare set of %d below k+1=%d, falling back to GN",
                 len(rare), params.smogn_k_neighbors + 1)
        return gn_augment(base, params, seed)

    kept_normal = _undersample(normal, params.gn_undersample_percent, rng) \
        if params.smogn_undersample else normal

    std = rows.covariates.std(axis=0)
    std[std == 0] = 1.0
    z = (rows.covariates - rows.covariates.mean(axis=0)) / std
    cov_std, y_std = _column_stds(rows)
    calendric = _calendric_mask(rows)

    new_ts, new_cov, new_y = [], [], []
    for seed_idx in rare:
        others = rare[rare != seed_idx]
        dists = np.linalg.norm(z[others] - z[seed_idx], axis=1)
        order = np.argsort(dists, kind="stable")[:params.smogn_k_neighbors]
        pick = order[rng.integers(len(order))]
        neighbor_idx = int(others[pick])
        max_distance = 0.5 * float(np.median(dists[order]))
        if dists[pick] <= max_distance:
            frac = float(rng.random())
            cov, target = smoter_interpolate(
                rows.covariates[seed_idx], rows.covariates[neighbor_idx],
                rows.target[seed_idx], rows.target[neighbor_idx],
                z[seed_idx], z[neighbor_idx], frac)
            for j in np.flatnonzero(calendric):
                parent = seed_idx if rng.random() < 0.5 else neighbor_idx
                cov[j] = rows.covariates[parent, j]
        else:
            cov, target = _gn_sample(rows, int(seed_idx), cov_std, y_std,
                                     calendric, rng)
        new_ts.append(rows.timestamps[seed_idx])
        new_cov.append(cov)
        new_y.append(float(target))
    keep_idx = np.sort(np.concatenate([kept_normal, rare]))
    return _assemble(rows, keep_idx, new_ts, new_cov, new_y)


def _append_scaled(history: TimeSeriesDataset, eta: float) -> AugmentedDataset:
    rows = _as_rows(history)
    scaled = history.target * eta
    timestamps = np.concatenate([rows.timestamps, rows.timestamps])
    order = np.argsort(timestamps, kind="stable")
    return replace(rows,
                   timestamps=timestamps[order],
                   covariates=np.vstack([rows.covariates,
                                         rows.covariates])[order],
                   target=np.concatenate([rows.target, scaled])[order])


def _truncate_recent(rows, max_samples: int):
    if rows.n <= max_samples:
        return rows
    return replace(rows,
                   timestamps=rows.timestamps[-max_samples:],
                   covariates=rows.covariates[-max_samples:],
                   target=rows.target[-max_samples:])


def build_refit_dataset(history: TimeSeriesDataset, eta: float,
                        params: AugmentParams, seed: int):
    """Dispatch on the configured method and cap at the most recent
    ``max_samples`` rows. On an empty rare set the virtual-sample methods
    fall back to plain scaling."""
    if params.method == "scale":
        return _truncate_recent(scale_dataset(history, eta),
                                params.max_samples)
    base = _append_scaled(history, eta) if params.append_scaled \
        else _as_rows(history)
    try:
        if params.method == "gn":
            augmented = gn_augment(base, params, seed)
        else:
            augmented = smogn_augment(base, params, seed)
    except EmptyRareSetError:
        log.info("empty rare set, substituting scaled dataset")
        return _truncate_recent(scale_dataset(history, eta),
                                params.max_samples)
    return _truncate_recent(augmented, params.max_samples)

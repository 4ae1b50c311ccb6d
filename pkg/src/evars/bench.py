"""Evaluation harness: metrics, comparison partners, scenario sweeps,
configuration search and timing."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from . import engine
from .augment import AugmentParams
from .cpd import DetectorConfig, DriftDetector
from .engine import EvarsConfig, output_scaling_factor
from .errors import (
    ConfigError,
    DegenerateWindowError,
    EvarsError,
    HistoryError,
    InputError,
)
from .gpr import predict, refit_with_structure, tune_base_model
from .simulate import ScenarioSpec, generate_scenario
from .timeseries import TimeSeriesDataset, require_observed, slice_rows

METHODS = ("m_base", "pr1", "pr2", "mwgpr", "cpd_scaled", "cpd_retrain",
           "cpd_mw", "evars")


def rmse(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise InputError(
            f"length mismatch or empty: {y_true.shape} vs {y_pred.shape}"
        )
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


@dataclass
class MethodResult:
    method: str
    predictions: np.ndarray
    variances: np.ndarray
    rmse: float
    refit_count: int
    cpu_time: float
    wall_time: float
    events: list[dict] = field(default_factory=list)

    def row(self, rmse_base: float | None = None) -> dict:
        out = {"method": self.method, "rmse": self.rmse,
               "refit_count": self.refit_count,
               "cpu_time_s": self.cpu_time, "wall_time_s": self.wall_time}
        if rmse_base is not None and rmse_base > 0:
            out["rmse_ratio"] = self.rmse / rmse_base
        return out


def _predict_series(model, online: TimeSeriesDataset
                    ) -> tuple[np.ndarray, np.ndarray]:
    means = np.empty(online.n)
    variances = np.empty(online.n)
    for i in range(online.n):
        means[i], variances[i] = predict(model, online.covariates[i])
    return means, variances


def _periodic_refit_loop(base_model, base_config, offline, online, config,
                         seed, every: int, window: int | None):
    history = offline
    current = base_model
    means = np.empty(online.n)
    variances = np.empty(online.n)
    refits = 0
    for i in range(online.n):
        means[i], variances[i] = predict(current, online.covariates[i])
        history = engine._append_observation(
            history, online.covariates[i], float(online.target[i]))
        if (i + 1) % every == 0:
            train = history if window is None else \
                slice_rows(history, max(0, history.n - window), history.n)
            current = refit_with_structure(
                base_config, train, budget=config.refit_budget,
                seed=engine._derived_seed(seed, history.n - 1, 1))
            refits += 1
    return means, variances, refits, []


def _cpd_gated_loop(base_model, base_config, offline, online, config, seed,
                    action: str):
    n_seas = offline.season_length
    detector = DriftDetector(config.detector, n_seas)
    detector.warm_start(offline.target)
    history = offline
    current = base_model
    multiplier = 1.0
    eta_old = 1.0
    means = np.empty(online.n)
    variances = np.empty(online.n)
    refits = 0
    events: list[dict] = []
    for i in range(online.n):
        if action == "scale":
            mean, variance = predict(base_model, online.covariates[i])
            means[i] = multiplier * mean
            variances[i] = multiplier**2 * variance
        else:
            means[i], variances[i] = predict(current, online.covariates[i])
        history = engine._append_observation(
            history, online.covariates[i], float(online.target[i]))
        t = history.n - 1
        fired, _ = detector.update(float(online.target[i]))
        if not fired:
            continue
        try:
            eta = output_scaling_factor(
                history.target, t, n_w=config.scale_window(n_seas),
                n_eta=config.scale_seasons, n_seas=n_seas)
        except (HistoryError, DegenerateWindowError) as exc:
            events.append({"step": t, "type": "skip", "reason": str(exc)})
            continue
        if eta <= 0 or abs(eta - eta_old) / eta_old <= config.scale_thr:
            events.append({"step": t, "type": "skip", "eta": eta,
                           "reason": "gate not passed"})
            continue
        events.append({"step": t, "type": "detect", "eta": eta,
                       "eta_old": eta_old})
        try:
            if action == "scale":
                multiplier = eta
            elif action == "retrain":
                current = refit_with_structure(
                    base_config, history, budget=config.refit_budget,
                    seed=engine._derived_seed(seed, t, 1))
                refits += 1
            else:  # window: one season before the change point
                train = slice_rows(history, max(0, history.n - n_seas),
                                   history.n)
                current = refit_with_structure(
                    base_config, train, budget=config.refit_budget,
                    seed=engine._derived_seed(seed, t, 1))
                refits += 1
        except EvarsError as exc:
            events.append({"step": t, "type": "skip", "eta": eta,
                           "reason": str(exc)})
            continue
        eta_old = eta
        events.append({"step": t, "type": "refit", "eta": eta})
    return means, variances, refits, events


def run_method(method: str, offline: TimeSeriesDataset,
               online: TimeSeriesDataset, base_model, base_config,
               config: EvarsConfig, seed: int = 0) -> MethodResult:
    """Run one comparison partner over the online part.

    CPU time is measured process-wide around the online loop only."""
    if method not in METHODS:
        raise ConfigError(
            f"unknown method {method!r}; valid: {', '.join(METHODS)}"
        )
    offline = require_observed(offline)
    online = require_observed(online)
    cpu0 = time.process_time()
    wall0 = time.perf_counter()
    events: list[dict] = []
    if method == "m_base":
        means, variances = _predict_series(base_model, online)
        refits = 0
    elif method == "pr1":
        means, variances, refits, events = _periodic_refit_loop(
            base_model, base_config, offline, online, config, seed,
            every=1, window=None)
    elif method == "pr2":
        means, variances, refits, events = _periodic_refit_loop(
            base_model, base_config, offline, online, config, seed,
            every=2, window=None)
    elif method == "mwgpr":
        window = config.max_samples_factor * offline.season_length
        means, variances, refits, events = _periodic_refit_loop(
            base_model, base_config, offline, online, config, seed,
            every=1, window=window)
    elif method == "cpd_scaled":
        means, variances, refits, events = _cpd_gated_loop(
            base_model, base_config, offline, online, config, seed, "scale")
    elif method == "cpd_retrain":
        means, variances, refits, events = _cpd_gated_loop(
            base_model, base_config, offline, online, config, seed, "retrain")
    elif method == "cpd_mw":
        means, variances, refits, events = _cpd_gated_loop(
            base_model, base_config, offline, online, config, seed, "window")
    else:  # evars
        means, variances, events, state = engine.run_online(
            base_model, base_config, offline, online, config, seed=seed)
        refits = state.refit_count
    cpu = time.process_time() - cpu0
    wall = time.perf_counter() - wall0
    return MethodResult(method=method, predictions=means, variances=variances,
                        rmse=rmse(online.target, means), refit_count=refits,
                        cpu_time=cpu, wall_time=wall, events=events)


@dataclass
class SweepCell:
    spec: ScenarioSpec
    rmse_base: float | None = None
    rmse_evars: float | None = None
    refit_count: int = 0
    error: str | None = None

    @property
    def ratio(self) -> float | None:
        if self.error or not self.rmse_base:
            return None
        return self.rmse_evars / self.rmse_base

    def row(self) -> dict:
        out = self.spec.to_dict()
        out.update({"rmse_base": self.rmse_base, "rmse_evars": self.rmse_evars,
                    "rmse_ratio": self.ratio, "refit_count": self.refit_count,
                    "error": self.error})
        return out


def _prepare_cell(spec: ScenarioSpec, tuning_budget: int, folds: int,
                  seed: int):
    offline, online = generate_scenario(spec)
    model, candidate = tune_base_model(offline, budget=tuning_budget,
                                       folds=folds, seed=seed)
    base_preds, _ = _predict_series(model, online)
    return offline, online, model, candidate, rmse(online.target, base_preds)


def sweep_grid(grid: list[ScenarioSpec], config: EvarsConfig, seed: int = 0,
               tuning_budget: int = 30, folds: int = 3) -> list[SweepCell]:
    """Per scenario: generate, tune the base model offline, run the online
    engine and record its RMSE-ratio. Failures are recorded per cell."""
    if not grid:
        raise ConfigError("scenario grid is empty")
    cells = []
    for index, spec in enumerate(grid):
        cell = SweepCell(spec=spec)
        try:
            offline, online, model, candidate, base_rmse = _prepare_cell(
                spec, tuning_budget, folds, engine._derived_seed(seed, index, 2))
            means, _, _, state = engine.run_online(
                model, candidate, offline, online, config,
                seed=engine._derived_seed(seed, index, 3))
            cell.rmse_base = base_rmse
            cell.rmse_evars = rmse(online.target, means)
            cell.refit_count = state.refit_count
        except EvarsError as exc:
            cell.error = str(exc)
        cells.append(cell)
    return cells


def mean_ratio(cells: list[SweepCell]) -> float:
    ratios = [c.ratio for c in cells if c.ratio is not None]
    if not ratios:
        raise EvarsError("no successful sweep cells")
    return float(np.mean(ratios))


def sample_evars_config(rng: np.random.Generator) -> EvarsConfig:
    detector = DetectorConfig(
        kind="changefinder" if rng.random() < 0.7 else "bocpd",
        cf_r=float(rng.uniform(0.1, 0.9)),
        cf_order=int(rng.integers(1, 3)),
        cf_smooth=int(rng.integers(2, 9)),
        cf_thr_perc=float(rng.uniform(60.0, 99.0)),
        const_hazard_factor=float(rng.uniform(1.0, 10.0)),
    )
    augment = AugmentParams(
        method=("scale", "gn", "smogn")[rng.integers(3)],
        append_scaled=bool(rng.random() < 0.5),
        gn_oversample_percent=float(rng.uniform(50.0, 300.0)),
        gn_undersample_percent=float(rng.uniform(50.0, 100.0)),
        gn_relevance_threshold=float(rng.uniform(0.5, 0.95)),
        smogn_relevance_threshold=float(rng.uniform(0.5, 0.95)),
        smogn_k_neighbors=int(rng.integers(3, 8)),
    )
    return EvarsConfig(
        scale_window_factor=float(rng.uniform(0.05, 0.3)),
        scale_seasons=int(rng.integers(1, 4)),
        scale_thr=float(rng.uniform(0.02, 0.5)),
        detector=detector,
        augment=augment,
        max_samples_factor=int(rng.choice([5, 10, 20])),
    )


def tune_evars_params(grid: list[ScenarioSpec], n_candidates: int,
                      seed: int = 0, tuning_budget: int = 30,
                      folds: int = 3) -> tuple[EvarsConfig, list[dict]]:
    """Random search over the engine's parameter space, scored by the mean
    RMSE-ratio over the grid. Candidate 0 is the default configuration;
    ties resolve to the lowest candidate index."""
    if n_candidates < 1:
        raise ConfigError("n_candidates must be >= 1")
    rng = np.random.default_rng(seed)
    candidates = [EvarsConfig()]
    while len(candidates) < n_candidates:
        try:
            candidates.append(sample_evars_config(rng))
        except EvarsError:
            continue

    prepared = []
    for index, spec in enumerate(grid):
        prepared.append(_prepare_cell(spec, tuning_budget, folds,
                                      engine._derived_seed(seed, index, 2)))

    best_idx, best_score = 0, np.inf
    scores = []
    for c_idx, candidate in enumerate(candidates):
        ratios = []
        for index, (offline, online, model, base_config, base_rmse) in \
                enumerate(prepared):
            try:
                means, _, _, _ = engine.run_online(
                    model, base_config, offline, online, candidate,
                    seed=engine._derived_seed(seed, index, 3))
                ratios.append(rmse(online.target, means) / base_rmse)
            except EvarsError:
                ratios.append(np.inf)
        score = float(np.mean(ratios)) if ratios else np.inf
        scores.append({"candidate": c_idx, "mean_rmse_ratio": score})
        if score < best_score:
            best_idx, best_score = c_idx, score
    return candidates[best_idx], scores


def write_report_csv(rows: list[dict], path) -> None:
    pd.DataFrame(rows).to_csv(path, index=False)


def write_report_json(rows: list[dict], path, metadata: dict | None = None
                      ) -> None:
    doc = {"metadata": metadata or {}, "results": rows}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, default=str)


def sweep_matrices(cells: list[SweepCell]) -> dict[str, pd.DataFrame]:
    """Mean RMSE-ratio pivoted over (kappa, delta_max), one matrix per
    season length, for heatmap plotting by external tools."""
    frame = pd.DataFrame([c.row() for c in cells])
    frame = frame[frame["rmse_ratio"].notna()]
    out = {}
    for n_seas, sub in frame.groupby("n_seas"):
        out[f"nseas_{n_seas}"] = sub.pivot_table(
            index="kappa", columns="delta_max", values="rmse_ratio",
            aggfunc="mean")
    return out

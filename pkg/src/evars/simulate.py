"""Synthetic seasonal series with a controlled output-scale manipulation
window during the online phase."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ScenarioError
from .timeseries import TimeSeriesDataset, split_offline_online

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScenarioSpec:
    n_seas: int = 50
    amplitude: float = 1.0
    length: int = 500
    offline_fraction: float = 0.8
    t_start: int = 10  # online index
    t_end: int = 80  # online index
    delta_base: float = 1.0
    delta_max: float = 2.0
    kappa: float = 0.5
    noise_y: float = 0.0
    noise_x: float = 0.0
    n_covariates: int = 1
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.n_seas < 2:
            raise ScenarioError("n_seas must be >= 2")
        if not 0 <= self.t_start < self.t_end:
            raise ScenarioError("need 0 <= t_start < t_end")
        if self.delta_base <= 0 or self.delta_max <= 0:
            raise ScenarioError("manipulation factors must be positive")
        if self.kappa < 0:
            raise ScenarioError("kappa must be >= 0")
        if self.noise_y < 0 or self.noise_x < 0:
            raise ScenarioError("noise levels must be >= 0")
        if self.n_covariates < 1:
            raise ScenarioError("need at least one covariate")

    @property
    def n_online(self) -> int:
        return self.length - int(np.floor(self.offline_fraction * self.length))

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


def manipulation_factor(t: int, spec: ScenarioSpec) -> float:
    """Manipulation factor at online step t: a ramp from delta_base toward
    delta_max entered at t_start, mirrored so that delta_base is reached
    again exactly at t_end. A window too short for the full ramp truncates
    the plateau at the triangle peak."""
    if t < spec.t_start or t >= spec.t_end:
        return spec.delta_base
    if spec.kappa == 0.0 or spec.delta_max == spec.delta_base:
        return spec.delta_base
    up = spec.kappa * (t - spec.t_start)
    down = spec.kappa * (spec.t_end - t)
    reach = abs(spec.delta_max - spec.delta_base)
    delta = min(up, down, reach)
    if spec.delta_max > spec.delta_base:
        return spec.delta_base + delta
    return spec.delta_base - delta


def manipulation_profile(spec: ScenarioSpec) -> np.ndarray:
    profile = np.array([manipulation_factor(t, spec)
                        for t in range(spec.n_online)])
    reach = abs(spec.delta_max - spec.delta_base)
    if spec.kappa > 0 and 2.0 * reach / spec.kappa > spec.t_end - spec.t_start:
        log.info("manipulation window too short for delta_max, "
                 "plateau truncated at the triangle peak")
    return profile


def generate_scenario(spec: ScenarioSpec
                      ) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """Generate the offline and online parts of one scenario.

    The base target is a positively offset sinusoid; covariates are
    phase-shifted sinusoids of the same period. Targets in the manipulation
    window are multiplied by the manipulation factor."""
    rng = np.random.default_rng(spec.seed)
    n = spec.length
    n_off = int(np.floor(spec.offline_fraction * n))
    if spec.t_end > n - n_off:
        raise ScenarioError(
            f"manipulation window end {spec.t_end} exceeds the online "
            f"length {n - n_off}"
        )
    t = np.arange(n)
    phase = 2.0 * np.pi * t / spec.n_seas
    # Offset of twice the amplitude keeps all targets positive, which the
    # scaling-factor window sums rely on.
    y = spec.amplitude * np.sin(phase) + 2.0 * spec.amplitude
    if spec.noise_y > 0:
        y = y + rng.normal(0.0, spec.noise_y, size=n)
    covariates = np.empty((n, spec.n_covariates))
    shifts = np.linspace(0.25, 1.75, spec.n_covariates) * np.pi
    for j in range(spec.n_covariates):
        covariates[:, j] = np.sin(phase + shifts[j])
    if spec.noise_x > 0:
        covariates = covariates + rng.normal(0.0, spec.noise_x,
                                             size=covariates.shape)
    delta = np.ones(n)
    delta[n_off:] = manipulation_profile(spec)
    y = y * delta
    dataset = TimeSeriesDataset(
        timestamps=t,
        covariates=covariates,
        target=y,
        season_length=spec.n_seas,
        covariate_names=tuple(f"x{j}" for j in range(spec.n_covariates)),
    )
    return split_offline_online(dataset, spec.offline_fraction)


def default_grid(n_seas_values=(25, 50), delta_max_values=(0.2, 2.0, 5.0),
                 kappa_values=(0.05, 0.5), seed: int = 0) -> list[ScenarioSpec]:
    """A reconstructed scenario grid spanning season length, extent, speed
    and window placement of the output scale change."""
    grid = []
    for n_seas in n_seas_values:
        length = 10 * n_seas
        n_online = length - int(np.floor(0.8 * length))
        windows = [(n_online // 10, n_online - n_online // 10),
                   (n_online // 3, 2 * n_online // 3)]
        for delta_max in delta_max_values:
            for kappa in kappa_values:
                for t_start, t_end in windows:
                    grid.append(ScenarioSpec(
                        n_seas=n_seas, length=length, delta_max=delta_max,
                        kappa=kappa, t_start=t_start, t_end=t_end,
                        noise_y=0.02, noise_x=0.02, seed=seed,
                        name=(f"nseas{n_seas}_dmax{delta_max}_k{kappa}"
                              f"_w{t_start}-{t_end}"),
                    ))
    return grid

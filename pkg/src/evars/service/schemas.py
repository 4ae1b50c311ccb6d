"""Request/response models for the forecasting service."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field


class DatasetPayload(BaseModel):
    """Inline dataset: covariate rows aligned with targets."""

    covariates: list[list[float]]
    target: list[float]
    season_length: int = Field(ge=2)
    covariate_names: list[str] | None = None
    timestamps: list[int] | None = None


class StreamCreateRequest(BaseModel):
    offline: DatasetPayload
    config: dict[str, Any] | None = None
    tuning_budget: int = Field(default=30, ge=1)
    folds: int = Field(default=3, ge=1)
    seed: int = 0


class StreamCreateResponse(BaseModel):
    stream_id: str
    chosen_model: dict[str, Any]


class StepRequest(BaseModel):
    covariates: list[float]
    target: float


class StepResponse(BaseModel):
    step: int
    mean: float
    variance: float
    eta_old: float
    refit_count: int
    new_events: list[dict[str, Any]]


class EventsResponse(BaseModel):
    stream_id: str
    events: list[dict[str, Any]]


class ScenarioRequest(BaseModel):
    n_seas: int = 50
    amplitude: float = 1.0
    length: int = 500
    offline_fraction: float = 0.8
    t_start: int = 10
    t_end: int = 80
    delta_base: float = 1.0
    delta_max: float = 2.0
    kappa: float = 0.5
    noise_y: float = 0.0
    noise_x: float = 0.0
    n_covariates: int = 1
    seed: int = 0


class ScenarioResponse(BaseModel):
    offline: DatasetPayload
    online: DatasetPayload


class ScalingFactorRequest(BaseModel):
    history: list[float]
    t: int
    window: int = Field(ge=1)
    seasons: int = Field(ge=1)
    season_length: int = Field(ge=2)


class ScalingFactorResponse(BaseModel):
    eta: float

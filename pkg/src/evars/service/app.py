"""HTTP front end for the online forecasting engine.

A stream is created from offline history (the base model is tuned on it),
then fed one observation per request; each step returns the prediction made
before the new target was observed plus any events it triggered."""

from __future__ import annotations

import uuid

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import engine
from ..configio import config_from_dict
from ..engine import EvarsConfig, EvarsState, output_scaling_factor
from ..errors import EvarsError
from ..gpr import tune_base_model
from ..simulate import ScenarioSpec, generate_scenario
from ..timeseries import TimeSeriesDataset
from .schemas import (
    DatasetPayload,
    EventsResponse,
    ScalingFactorRequest,
    ScalingFactorResponse,
    ScenarioRequest,
    ScenarioResponse,
    StepRequest,
    StepResponse,
    StreamCreateRequest,
    StreamCreateResponse,
)


def _dataset_from_payload(payload: DatasetPayload) -> TimeSeriesDataset:
    covariates = np.asarray(payload.covariates, dtype=float)
    n, d = covariates.shape if covariates.ndim == 2 else (len(covariates), 0)
    names = tuple(payload.covariate_names or (f"x{j}" for j in range(d)))
    timestamps = np.asarray(payload.timestamps) if payload.timestamps \
        else np.arange(n)
    return TimeSeriesDataset(
        timestamps=timestamps, covariates=covariates,
        target=np.asarray(payload.target, dtype=float),
        season_length=payload.season_length, covariate_names=names)


def _payload_from_dataset(dataset: TimeSeriesDataset) -> DatasetPayload:
    return DatasetPayload(
        covariates=dataset.covariates.tolist(),
        target=dataset.target.tolist(),
        season_length=dataset.season_length,
        covariate_names=list(dataset.covariate_names),
        timestamps=dataset.timestamps.tolist(),
    )


def create_app() -> FastAPI:
    app = FastAPI(title="evars", version="0.1.0")
    streams: dict[str, EvarsState] = {}

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "streams": len(streams)}

    @app.post("/streams", response_model=StreamCreateResponse)
    def create_stream(request: StreamCreateRequest) -> StreamCreateResponse:
        try:
            offline = _dataset_from_payload(request.offline)
            config = config_from_dict(request.config) if request.config \
                else EvarsConfig()
            model, candidate = tune_base_model(
                offline, budget=request.tuning_budget, folds=request.folds,
                seed=request.seed)
            state = engine.init_state(model, candidate, offline, config,
                                      seed=request.seed)
        except EvarsError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        stream_id = uuid.uuid4().hex
        streams[stream_id] = state
        return StreamCreateResponse(stream_id=stream_id,
                                    chosen_model=candidate.to_dict())

    def _get_state(stream_id: str) -> EvarsState:
        state = streams.get(stream_id)
        if state is None:
            raise HTTPException(status_code=404,
                                detail=f"no stream {stream_id}")
        return state

    @app.post("/streams/{stream_id}/step", response_model=StepResponse)
    def step(stream_id: str, request: StepRequest) -> StepResponse:
        state = _get_state(stream_id)
        before = len(state.events)
        try:
            mean, variance = engine.evars_step(state, request.covariates,
                                               request.target)
        except EvarsError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return StepResponse(step=state.history.n - 1, mean=mean,
                            variance=variance, eta_old=state.eta_old,
                            refit_count=state.refit_count,
                            new_events=state.events[before:])

    @app.get("/streams/{stream_id}/events", response_model=EventsResponse)
    def events(stream_id: str) -> EventsResponse:
        state = _get_state(stream_id)
        return EventsResponse(stream_id=stream_id, events=state.events)

    @app.delete("/streams/{stream_id}")
    def delete(stream_id: str) -> dict:
        _get_state(stream_id)
        del streams[stream_id]
        return {"deleted": stream_id}

    @app.post("/simulate", response_model=ScenarioResponse)
    def simulate(request: ScenarioRequest) -> ScenarioResponse:
        try:
            spec = ScenarioSpec(**request.model_dump())
            offline, online = generate_scenario(spec)
        except EvarsError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return ScenarioResponse(offline=_payload_from_dataset(offline),
                                online=_payload_from_dataset(online))

    @app.post("/scaling-factor", response_model=ScalingFactorResponse)
    def scaling_factor(request: ScalingFactorRequest) -> ScalingFactorResponse:
        try:
            eta = output_scaling_factor(
                request.history, request.t, n_w=request.window,
                n_eta=request.seasons, n_seas=request.season_length)
        except EvarsError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return ScalingFactorResponse(eta=eta)

    return app

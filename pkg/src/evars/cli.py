"""Command-line front end: simulation, online runs, benchmarks, parameter
search and the HTTP service."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import click
import pandas as pd

from . import bench, configio, engine
from .engine import EvarsConfig
from .errors import EvarsError
from .gpr import model_to_dict, tune_base_model
from .simulate import default_grid, generate_scenario
from .timeseries import add_features, impute_mean, load_csv, split_offline_online

OUT_ROOT_ENV = "EVARS_OUT_ROOT"


def _resolve_out(out: str | None, subcommand: str, overwrite: bool) -> Path:
    if out is None:
        root = os.environ.get(OUT_ROOT_ENV, ".")
        out = str(Path(root) / subcommand)
    path = Path(out)
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise click.ClickException(
            f"output directory {path} is not empty (use --overwrite)"
        )
    path.mkdir(parents=True, exist_ok=True)
    return path


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_snapshot(out: Path, subcommand: str, seed: int,
                    config: EvarsConfig | None, inputs: list) -> None:
    doc = {
        "subcommand": subcommand,
        "seed": seed,
        "config": configio.config_to_dict(config) if config else None,
        "inputs": {str(p): _sha256(p) for p in inputs},
    }
    (out / "snapshot.json").write_text(json.dumps(doc, indent=2))


def _load_config(config_path: str | None) -> EvarsConfig:
    if config_path is None:
        return EvarsConfig()
    return configio.read_engine_config(config_path)


def _prepare_dataset(manifest_path: str):
    manifest, feature_spec = configio.read_dataset_manifest(manifest_path)
    csv_path = Path(manifest["path"])
    if not csv_path.is_absolute():
        csv_path = Path(manifest_path).parent / csv_path
    dataset = load_csv(csv_path, target_column=manifest["target_column"],
                       timestamp_column=manifest["timestamp_column"],
                       season_length=manifest["season_length"],
                       frequency=manifest["frequency"])
    dataset = impute_mean(dataset)
    dataset = add_features(dataset, feature_spec)
    return split_offline_online(dataset, manifest["offline_fraction"])


@click.group()
def main():
    """Online seasonal forecasting with event-triggered model refitting."""


@main.command("simulate")
@click.argument("grid_path", required=False)
@click.option("--out", default=None, help="output directory")
@click.option("--seed", default=0, type=int)
@click.option("--overwrite", is_flag=True)
def cmd_simulate(grid_path, out, seed, overwrite):
    """Write one offline/online CSV pair per scenario in the grid file.

    Without a grid file, the built-in default grid is used."""
    try:
        specs = configio.read_scenario_grid(grid_path) if grid_path \
            else default_grid(seed=seed)
        datasets = []
        for index, spec in enumerate(specs):
            if spec.seed == 0 and seed != 0:
                spec = dataclasses.replace(spec, seed=seed)
            offline, online = generate_scenario(spec)
            datasets.append((index, spec, offline, online))
    except EvarsError as exc:
        raise click.ClickException(str(exc)) from None
    out_dir = _resolve_out(out, "simulate", overwrite)
    for index, spec, offline, online in datasets:
        stem = spec.name or f"scenario_{index:03d}"
        offline.write_csv(out_dir / f"{stem}_offline.csv")
        online.write_csv(out_dir / f"{stem}_online.csv")
    configio.write_scenario_grid([s for _, s, _, _ in datasets],
                                 out_dir / "grid.ini")
    _write_snapshot(out_dir, "simulate", seed, None,
                    [grid_path] if grid_path else [])
    click.echo(f"wrote {2 * len(datasets)} dataset files to {out_dir}")


@main.command("run")
@click.argument("manifest_path")
@click.option("--config", "config_path", default=None)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None)
@click.option("--overwrite", is_flag=True)
@click.option("--tuning-budget", default=30, type=int)
@click.option("--folds", default=3, type=int)
def cmd_run(manifest_path, config_path, seed, out, overwrite, tuning_budget,
            folds):
    """Tune the base model offline and run the online engine over the rest."""
    try:
        config = _load_config(config_path)
        offline, online = _prepare_dataset(manifest_path)
        model, candidate = tune_base_model(offline, budget=tuning_budget,
                                           folds=folds, seed=seed)
        means, variances, events, state = engine.run_online(
            model, candidate, offline, online, config, seed=seed)
    except EvarsError as exc:
        raise click.ClickException(str(exc)) from None
    out_dir = _resolve_out(out, "run", overwrite)
    (out_dir / "model.json").write_text(json.dumps(model_to_dict(model)))
    pd.DataFrame({
        "timestamp": online.timestamps,
        "y_true": online.target,
        "y_pred": means,
        "pred_variance": variances,
    }).to_csv(out_dir / "predictions.csv", index=False)
    with open(out_dir / "events.jsonl", "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(event) + "\n")
    metrics = {"rmse": bench.rmse(online.target, means),
               "refit_count": state.refit_count,
               "n_online": online.n}
    (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2))
    inputs = [manifest_path] + ([config_path] if config_path else [])
    _write_snapshot(out_dir, "run", seed, config, inputs)
    configio.write_engine_config(config, out_dir / "config.ini")
    click.echo(f"online RMSE {metrics['rmse']:.4f}, "
               f"{state.refit_count} refits -> {out_dir}")


@main.command("bench")
@click.argument("input_path")
@click.option("--methods", default="m_base,evars",
              help="comma-separated method names")
@click.option("--config", "config_path", default=None)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None)
@click.option("--overwrite", is_flag=True)
@click.option("--tuning-budget", default=30, type=int)
@click.option("--folds", default=3, type=int)
def cmd_bench(input_path, methods, config_path, seed, out, overwrite,
              tuning_budget, folds):
    """Compare methods on a dataset manifest or on a scenario grid."""
    names = [m.strip() for m in methods.split(",") if m.strip()]
    bad = [m for m in names if m not in bench.METHODS]
    if bad:
        raise click.ClickException(
            f"unknown methods {bad}; valid: {', '.join(bench.METHODS)}"
        )
    try:
        config = _load_config(config_path)
        if configio.is_dataset_manifest(input_path):
            jobs = [("dataset", *_prepare_dataset(input_path))]
        else:
            jobs = []
            for spec in configio.read_scenario_grid(input_path):
                offline, online = generate_scenario(spec)
                jobs.append((spec.name or "scenario", offline, online))
        rows = []
        for job_index, (label, offline, online) in enumerate(jobs):
            model, candidate = tune_base_model(
                offline, budget=tuning_budget, folds=folds,
                seed=engine._derived_seed(seed, job_index, 2))
            base_rmse = None
            for method in names:
                result = bench.run_method(method, offline, online, model,
                                          candidate, config, seed=seed)
                if method == "m_base":
                    base_rmse = result.rmse
                row = {"dataset": label, **result.row(base_rmse)}
                rows.append(row)
    except EvarsError as exc:
        raise click.ClickException(str(exc)) from None
    out_dir = _resolve_out(out, "bench", overwrite)
    bench.write_report_csv(rows, out_dir / "report.csv")
    bench.write_report_json(rows, out_dir / "report.json",
                            metadata={"seed": seed, "methods": names})
    inputs = [input_path] + ([config_path] if config_path else [])
    _write_snapshot(out_dir, "bench", seed, config, inputs)
    click.echo(f"wrote {len(rows)} report rows to {out_dir}")


@main.command("tune")
@click.argument("grid_path", required=False)
@click.option("--candidates", default=20, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None)
@click.option("--overwrite", is_flag=True)
@click.option("--tuning-budget", default=30, type=int)
def cmd_tune(grid_path, candidates, seed, out, overwrite, tuning_budget):
    """Random search over the engine's parameters, scored on a grid."""
    try:
        specs = configio.read_scenario_grid(grid_path) if grid_path \
            else default_grid(seed=seed)
        chosen, scores = bench.tune_evars_params(
            specs, n_candidates=candidates, seed=seed,
            tuning_budget=tuning_budget)
    except EvarsError as exc:
        raise click.ClickException(str(exc)) from None
    out_dir = _resolve_out(out, "tune", overwrite)
    configio.write_engine_config(chosen, out_dir / "chosen_config.ini")
    bench.write_report_csv(scores, out_dir / "candidate_scores.csv")
    _write_snapshot(out_dir, "tune", seed, chosen,
                    [grid_path] if grid_path else [])
    best = min(scores, key=lambda s: s["mean_rmse_ratio"])
    click.echo(f"best candidate {best['candidate']} with mean RMSE-ratio "
               f"{best['mean_rmse_ratio']:.4f} -> {out_dir}")


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def cmd_serve(host, port):
    """Run the HTTP service for online stepping."""
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())

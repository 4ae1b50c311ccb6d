"""Flat key-value configuration files (INI sections mirror module names),
dataset manifests and scenario grid files. Unknown keys are errors so
parameter-name typos fail loudly."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import fields

from .augment import AugmentParams
from .cpd import DetectorConfig
from .engine import EvarsConfig
from .errors import ConfigError
from .simulate import ScenarioSpec
from .timeseries import FeatureSpec


def _coerce(value: str, target_type):
    if target_type is bool:
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {value!r}")
    if target_type is int:
        return int(value)
    if target_type is float:
        return float(value)
    return value.strip()


def _section_to_kwargs(section, cls) -> dict:
    known = {f.name: f.type for f in fields(cls)}
    type_map = {"int": int, "float": float, "bool": bool, "str": str}
    kwargs = {}
    for key, value in section.items():
        if key not in known:
            raise ConfigError(
                f"unknown key {key!r} for section [{cls.__name__}]; "
                f"valid keys: {', '.join(sorted(known))}"
            )
        annotation = known[key]
        base = str(annotation).split("|")[0].strip()
        kwargs[key] = _coerce(value, type_map.get(base, str))
    return kwargs


def _read_ini(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    return parser


def read_engine_config(path) -> EvarsConfig:
    parser = _read_ini(path)
    allowed = {"evars", "cpd", "augment"}
    unknown = set(parser.sections()) - allowed
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    detector = DetectorConfig(**_section_to_kwargs(
        parser["cpd"] if parser.has_section("cpd") else {}, DetectorConfig))
    augment = AugmentParams(**_section_to_kwargs(
        parser["augment"] if parser.has_section("augment") else {},
        AugmentParams))
    engine_kwargs = _section_to_kwargs(
        parser["evars"] if parser.has_section("evars") else {}, EvarsConfig)
    engine_kwargs.pop("detector", None)
    engine_kwargs.pop("augment", None)
    return EvarsConfig(detector=detector, augment=augment, **engine_kwargs)


def config_to_dict(config: EvarsConfig) -> dict:
    return dataclasses.asdict(config)


def config_from_dict(doc: dict) -> EvarsConfig:
    doc = dict(doc)
    detector = DetectorConfig(**doc.pop("detector", {}))
    augment = AugmentParams(**doc.pop("augment", {}))
    return EvarsConfig(detector=detector, augment=augment, **doc)


def write_engine_config(config: EvarsConfig, path) -> None:
    parser = configparser.ConfigParser()
    doc = config_to_dict(config)
    detector = doc.pop("detector")
    augment = doc.pop("augment")
    parser["evars"] = {k: str(v) for k, v in doc.items()}
    parser["cpd"] = {k: str(v) for k, v in detector.items() if v is not None}
    parser["augment"] = {k: str(v) for k, v in augment.items()}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


_MANIFEST_KEYS = {"path", "target_column", "timestamp_column", "frequency",
                  "season_length", "offline_fraction"}
_FEATURE_KEYS = {"lags", "seasonal_lags", "rolling_windows",
                 "seasonal_rolling_windows", "calendric"}


def _int_list(value: str) -> tuple[int, ...]:
    parts = [p.strip() for p in value.split(",") if p.strip()]
    return tuple(int(p) for p in parts)


def read_dataset_manifest(path) -> tuple[dict, FeatureSpec]:
    """A manifest names the CSV, its key columns and the feature expansion."""
    parser = _read_ini(path)
    if not parser.has_section("dataset"):
        raise ConfigError(f"{path} lacks a [dataset] section")
    section = parser["dataset"]
    unknown = set(section) - _MANIFEST_KEYS
    if unknown:
        raise ConfigError(f"unknown manifest keys {sorted(unknown)}")
    for key in ("path", "target_column", "timestamp_column", "season_length"):
        if key not in section:
            raise ConfigError(f"manifest is missing key {key!r}")
    manifest = {
        "path": section["path"],
        "target_column": section["target_column"],
        "timestamp_column": section["timestamp_column"],
        "frequency": section.get("frequency"),
        "season_length": int(section["season_length"]),
        "offline_fraction": float(section.get("offline_fraction", "0.8")),
    }
    feature_spec = FeatureSpec()
    if parser.has_section("features"):
        fsec = parser["features"]
        unknown = set(fsec) - _FEATURE_KEYS
        if unknown:
            raise ConfigError(f"unknown feature keys {sorted(unknown)}")
        feature_spec = FeatureSpec(
            lags=_int_list(fsec.get("lags", "")),
            seasonal_lags=_int_list(fsec.get("seasonal_lags", "")),
            rolling_windows=_int_list(fsec.get("rolling_windows", "")),
            seasonal_rolling_windows=_int_list(
                fsec.get("seasonal_rolling_windows", "")),
            calendric=tuple(p.strip() for p in
                            fsec.get("calendric", "").split(",") if p.strip()),
        )
    return manifest, feature_spec


def is_dataset_manifest(path) -> bool:
    return _read_ini(path).has_section("dataset")


def read_scenario_grid(path) -> list[ScenarioSpec]:
    parser = _read_ini(path)
    known = {f.name for f in fields(ScenarioSpec)}
    specs = []
    for name in parser.sections():
        if not name.startswith("scenario"):
            raise ConfigError(
                f"grid sections must start with 'scenario', got [{name}]"
            )
        section = parser[name]
        unknown = set(section) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
        kwargs = _section_to_kwargs(section, ScenarioSpec)
        kwargs.setdefault("name", name)
        specs.append(ScenarioSpec(**kwargs))
    if not specs:
        raise ConfigError(f"{path} contains no scenario sections")
    return specs


def write_scenario_grid(specs: list[ScenarioSpec], path) -> None:
    parser = configparser.ConfigParser()
    for index, spec in enumerate(specs):
        doc = {k: str(v) for k, v in spec.to_dict().items()}
        parser[f"scenario:{index}"] = doc
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)

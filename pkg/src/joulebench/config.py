"""Benchmark configuration: domain types, validation, YAML loading, overrides."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .energy import GridProfile
from .errors import ConfigError


class DispatchMode(enum.Enum):
    BURST = "burst"
    FIXED_RATE = "rate"


@dataclass(frozen=True)
class DispatchPolicy:
    mode: DispatchMode = DispatchMode.BURST
    rate: float | None = None  # requests/second, required iff FIXED_RATE


@dataclass(frozen=True)
class ModelProfile:
    """Size descriptors used by the params-vs-energy fit."""

    name: str
    params: int  # trainable parameter count
    layers: int  # sequential layer count


# Pythia suite size ladder; params/layers pairs for the built-in fit inputs.
KNOWN_MODEL_PROFILES: dict[str, ModelProfile] = {
    p.name: p
    for p in (
        ModelProfile("pythia-70m", 70_000_000, 6),
        ModelProfile("pythia-160m", 160_000_000, 12),
        ModelProfile("pythia-410m", 410_000_000, 24),
        ModelProfile("pythia-1b", 1_000_000_000, 16),
        ModelProfile("pythia-1.4b", 1_400_000_000, 24),
        ModelProfile("pythia-2.8b", 2_800_000_000, 32),
        ModelProfile("pythia-6.9b", 6_900_000_000, 32),
    )
}


def resolve_profile(model: str, extra: Mapping[str, ModelProfile] | None = None) -> ModelProfile | None:
    """Look up a model's size profile by exact name, then by path basename."""
    for table in (extra or {}, KNOWN_MODEL_PROFILES):
        if model in table:
            return table[model]
    base = model.rsplit("/", 1)[-1].lower()
    for table in (extra or {}, KNOWN_MODEL_PROFILES):
        if base in table:
            return table[base]
    return None


@dataclass(frozen=True)
class BenchConfig:
    endpoint_url: str = "http://127.0.0.1:8000"
    models: tuple[str, ...] = ()
    request_loads: tuple[int, ...] = ()
    warmup_count: int = 200
    repeats: int = 1
    dataset_path: str = ""
    dataset_format: str = "hellaswag"  # or "lines"
    max_prompts: int | None = None
    dispatch: DispatchPolicy = DispatchPolicy()
    sample_interval: float = 15.0  # seconds
    max_output_tokens: int = 128
    grid: GridProfile = GridProfile(carbon_intensity=475.0, pue=1.0)
    power_sources: tuple[str, ...] = ("auto",)
    model_profiles: tuple[ModelProfile, ...] = ()


def config_violations(config: BenchConfig) -> list[str]:
    """Every invariant violation in the config, as "Code: detail" strings."""
    problems = []
    if not config.endpoint_url:
        problems.append("MissingEndpoint: endpoint_url is empty")
    if not config.models:
        problems.append("EmptyModels: at least one model is required")
    if not config.request_loads:
        problems.append("EmptyLoads: at least one request load is required")
    if any(load <= 0 for load in config.request_loads):
        problems.append(f"NonPositiveLoad: loads must be positive, got {list(config.request_loads)}")
    if len(set(config.request_loads)) != len(config.request_loads):
        problems.append(f"DuplicateLoad: loads must be distinct, got {list(config.request_loads)}")
    if config.warmup_count < 0:
        problems.append(f"NegativeWarmup: warmup_count must be >= 0, got {config.warmup_count}")
    if config.repeats < 1:
        problems.append(f"NonPositiveRepeats: repeats must be >= 1, got {config.repeats}")
    if not config.dataset_path:
        problems.append("MissingDataset: dataset_path is required")
    if config.dataset_format not in ("hellaswag", "lines"):
        problems.append(f"UnknownDatasetFormat: {config.dataset_format!r}")
    if config.max_prompts is not None and config.max_prompts <= 0:
        problems.append(f"NonPositiveMaxPrompts: got {config.max_prompts}")
    if config.dispatch.mode is DispatchMode.FIXED_RATE:
        if config.dispatch.rate is None or config.dispatch.rate <= 0:
            problems.append(f"NonPositiveRate: fixed-rate dispatch needs rate > 0, got {config.dispatch.rate}")
    elif config.dispatch.rate is not None:
        problems.append("RateWithoutFixedRate: burst dispatch carries no rate")
    if config.sample_interval <= 0:
        problems.append(f"NonPositiveSampleInterval: got {config.sample_interval}")
    if config.max_output_tokens < 1:
        problems.append(f"NonPositiveMaxTokens: got {config.max_output_tokens}")
    if config.grid.carbon_intensity < 0:
        problems.append(f"NegativeCarbonIntensity: got {config.grid.carbon_intensity}")
    if config.grid.pue < 1.0:
        problems.append(f"PueBelowOne: got {config.grid.pue}")
    if not config.power_sources:
        problems.append("EmptyPowerSources: at least one source spec is required")
    for profile in config.model_profiles:
        if profile.params <= 0 or profile.layers <= 0:
            problems.append(f"BadModelProfile: {profile.name} needs positive params and layers")
    return problems


def validate_config(config: BenchConfig) -> BenchConfig:
    """Return the config unchanged, or raise ConfigError listing all violations."""
    problems = config_violations(config)
    if problems:
        raise ConfigError(problems)
    return config


def load_config_file(path: str | Path) -> BenchConfig:
    """Parse a YAML config document into a BenchConfig (no validation)."""
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError([f"BadConfigDocument: expected a mapping at top level of {path}"])
    return config_from_mapping(doc)


def config_from_mapping(doc: Mapping[str, Any]) -> BenchConfig:
    known = {
        "endpoint_url", "models", "request_loads", "warmup_count", "repeats",
        "dataset_path", "dataset_format", "max_prompts", "dispatch",
        "sample_interval", "max_output_tokens", "grid", "power_sources",
        "model_profiles",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError([f"UnknownConfigKey: {key}" for key in sorted(unknown)])

    kwargs: dict[str, Any] = {}
    for key in ("endpoint_url", "dataset_path", "dataset_format"):
        if key in doc:
            kwargs[key] = str(doc[key])
    for key in ("warmup_count", "repeats", "max_output_tokens"):
        if key in doc:
            kwargs[key] = int(doc[key])
    if "max_prompts" in doc:
        kwargs["max_prompts"] = None if doc["max_prompts"] is None else int(doc["max_prompts"])
    if "sample_interval" in doc:
        kwargs["sample_interval"] = float(doc["sample_interval"])
    if "models" in doc:
        kwargs["models"] = tuple(str(m) for m in doc["models"])
    if "request_loads" in doc:
        kwargs["request_loads"] = tuple(int(n) for n in doc["request_loads"])
    if "power_sources" in doc:
        kwargs["power_sources"] = tuple(str(s) for s in doc["power_sources"])
    if "dispatch" in doc:
        section = doc["dispatch"] or {}
        mode = DispatchMode(str(section.get("mode", "burst")))
        rate = section.get("rate")
        kwargs["dispatch"] = DispatchPolicy(mode, None if rate is None else float(rate))
    if "grid" in doc:
        section = doc["grid"] or {}
        kwargs["grid"] = GridProfile(
            carbon_intensity=float(section.get("carbon_intensity", 475.0)),
            pue=float(section.get("pue", 1.0)),
        )
    if "model_profiles" in doc:
        profiles = []
        for name, spec in (doc["model_profiles"] or {}).items():
            profiles.append(ModelProfile(str(name), int(spec["params"]), int(spec["layers"])))
        kwargs["model_profiles"] = tuple(profiles)
    return BenchConfig(**kwargs)


def apply_overrides(config: BenchConfig, **overrides: Any) -> BenchConfig:
    """Overlay non-None keyword overrides (CLI flags) onto a config."""
    changes = {key: value for key, value in overrides.items() if value is not None}
    if not changes:
        return config
    return replace(config, **changes)


def config_to_mapping(config: BenchConfig) -> dict[str, Any]:
    """Inverse of config_from_mapping; used for the report's config echo."""
    return {
        "endpoint_url": config.endpoint_url,
        "models": list(config.models),
        "request_loads": list(config.request_loads),
        "warmup_count": config.warmup_count,
        "repeats": config.repeats,
        "dataset_path": str(config.dataset_path),
        "dataset_format": config.dataset_format,
        "max_prompts": config.max_prompts,
        "dispatch": {"mode": config.dispatch.mode.value, "rate": config.dispatch.rate},
        "sample_interval": config.sample_interval,
        "max_output_tokens": config.max_output_tokens,
        "grid": {"carbon_intensity": config.grid.carbon_intensity, "pue": config.grid.pue},
        "power_sources": list(config.power_sources),
        "model_profiles": {
            p.name: {"params": p.params, "layers": p.layers} for p in config.model_profiles
        },
    }

"""Typed run configuration: TOML files with per-module sections, flag
overrides, shipped presets, and the SATD_DATA_DIR data root.

A config file may set any subset of the documented keys; unknown sections or
keys fail fast with the full list of valid keys.  Resolution order is
defaults < file < flags.  A previously written run manifest (JSON with a
``config`` payload) is accepted wherever a TOML file is, which makes re-runs
of a manifest a first-class operation.
"""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DATA_ROOT_ENV = "SATD_DATA_DIR"

# section -> key -> default value; the default's type is the key's type.
CONFIG_SCHEMA: dict[str, dict[str, object]] = {
    "data": {
        "root": ".",
        "dataset": "dataset.jsonl",
    },
    "corpus": {
        "tracker": "jira",
        "base_url": "",
        "projects": [],
        "max_issues": 600,
        "auth_token": "",
        "cache_dir": "",
        "offline": False,
        "bot_usernames": [],
        "code_patterns": [],
    },
    "preprocess": {
        "min_count": 1,
        "max_len": 256,
        "embedding_source": "random",
        "embedding_path": "",
        "embedding_dim": 300,
        "embedding_epochs": 5,
        "embedding_buckets": 131072,
    },
    "imbalance": {
        "strategy": "none",
        "eda_alpha": 0.1,
        "synonyms_path": "",
    },
    "model": {
        "classifier": "cnn",
        "region_sizes": [3, 4, 5],
        "feature_maps": 100,
        "epochs": 20,
        "batch_size": 64,
        "learning_rate": 0.001,
        "embedding_trainable": True,
        "early_stop": True,
        "val_fraction": 0.1,
        "patience": 3,
        "keywords_path": "",
    },
    "evaluation": {
        "k": 10,
        "seed": 42,
        "step": 100,
        "budget_sizes": [],
        "plans": [],
        "source_path": "",
    },
    "keywords": {
        "top_fraction": 0.1,
        "top_m_features": 10,
        "per_project": False,
        "sizes": [1, 2, 3, 4, 5],
    },
}

# element type for list-valued keys
_LIST_ELEMENT_TYPES = {
    ("corpus", "projects"): str,
    ("corpus", "bot_usernames"): str,
    ("corpus", "code_patterns"): str,
    ("model", "region_sizes"): int,
    ("evaluation", "budget_sizes"): int,
    ("evaluation", "plans"): str,
    ("keywords", "sizes"): int,
}


class ConfigError(ValueError):
    """Invalid config file, unknown key, or type mismatch."""


def valid_keys(section: str) -> list[str]:
    return sorted(CONFIG_SCHEMA[section])


def default_config() -> dict[str, dict[str, object]]:
    return copy.deepcopy(CONFIG_SCHEMA)


def _check_value(section: str, key: str, value: object) -> object:
    default = CONFIG_SCHEMA[section][key]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"key [{section}] {key} expects a boolean, "
                              f"got {type(value).__name__}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"key [{section}] {key} expects an integer, "
                              f"got {type(value).__name__}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"key [{section}] {key} expects a number, "
                              f"got {type(value).__name__}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"key [{section}] {key} expects a string, "
                              f"got {type(value).__name__}")
        return value
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"key [{section}] {key} expects a list, "
                              f"got {type(value).__name__}")
        element_type = _LIST_ELEMENT_TYPES[(section, key)]
        out = []
        for item in value:
            if element_type is int and (isinstance(item, bool) or not isinstance(item, int)):
                raise ConfigError(f"key [{section}] {key} expects integers, "
                                  f"got {type(item).__name__}")
            if element_type is str and not isinstance(item, str):
                raise ConfigError(f"key [{section}] {key} expects strings, "
                                  f"got {type(item).__name__}")
            out.append(item)
        return out
    raise ConfigError(f"key [{section}] {key} has unsupported schema type")


def validate_values(values: dict) -> dict:
    """Check sections, keys, and types of a partial config mapping."""
    checked: dict[str, dict[str, object]] = {}
    for section, entries in values.items():
        if section not in CONFIG_SCHEMA:
            raise ConfigError(
                f"unknown config section [{section}]; valid sections: "
                f"{', '.join(sorted(CONFIG_SCHEMA))}")
        if not isinstance(entries, dict):
            raise ConfigError(f"section [{section}] must be a table of keys")
        checked[section] = {}
        for key, value in entries.items():
            if key not in CONFIG_SCHEMA[section]:
                raise ConfigError(
                    f"unknown key [{section}] {key}; valid keys in [{section}]: "
                    f"{', '.join(valid_keys(section))}")
            checked[section][key] = _check_value(section, key, value)
    return checked


def load_config_file(path) -> dict:
    """Parse and validate one TOML config file or a manifest JSON replay."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    if path.suffix.lower() == ".json":
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        # A run manifest wraps the resolved config under "config".
        values = payload.get("config", payload)
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: manifest 'config' must be an object")
        values = {k: v for k, v in values.items() if k in CONFIG_SCHEMA}
        return validate_values(values)
    try:
        with path.open("rb") as fh:
            values = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    return validate_values(values)


def resolve_config(file_values: dict | None = None,
                   overrides: dict | None = None) -> dict:
    """Merge defaults < file < overrides into a fully populated config."""
    config = default_config()
    for source in (file_values, overrides):
        if not source:
            continue
        for section, entries in validate_values(source).items():
            config[section].update(entries)
    return config


def preset_path(name: str) -> Path:
    """Path of a shipped preset such as default.toml or tuned.toml."""
    from importlib import resources

    return Path(str(resources.files("satdkit.data").joinpath(name)))


def data_root(config: dict) -> Path:
    """Data root: SATD_DATA_DIR wins over [data] root."""
    env = os.environ.get(DATA_ROOT_ENV, "").strip()
    if env:
        return Path(env)
    return Path(config["data"]["root"])


def resolve_data_path(config: dict, value: str) -> Path:
    """Resolve a possibly relative path against the data root."""
    path = Path(value)
    if path.is_absolute():
        return path
    return data_root(config) / path


def pipeline_config(config: dict, seed: int | None = None):
    """Build the evaluation PipelineConfig from a resolved config mapping."""
    from .evaluation.pipeline import PipelineConfig

    def opt_path(value: str) -> str | None:
        return str(resolve_data_path(config, value)) if value else None

    model = config["model"]
    pre = config["preprocess"]
    imb = config["imbalance"]
    return PipelineConfig(
        classifier=model["classifier"],
        region_sizes=tuple(model["region_sizes"]),
        feature_maps_per_size=model["feature_maps"],
        embedding_dim=pre["embedding_dim"],
        max_len=pre["max_len"],
        epochs=model["epochs"],
        batch_size=model["batch_size"],
        learning_rate=model["learning_rate"],
        embedding_trainable=model["embedding_trainable"],
        embedding_source=pre["embedding_source"],
        embedding_path=opt_path(pre["embedding_path"]),
        embedding_epochs=pre["embedding_epochs"],
        embedding_buckets=pre["embedding_buckets"],
        min_count=pre["min_count"],
        imbalance=imb["strategy"],
        eda_alpha=imb["eda_alpha"],
        synonyms_path=opt_path(imb["synonyms_path"]),
        keywords_path=opt_path(model["keywords_path"]),
        early_stop=model["early_stop"],
        val_fraction=model["val_fraction"],
        patience=model["patience"],
        seed=config["evaluation"]["seed"] if seed is None else seed,
    )


def schema_help(sections) -> str:
    """Human-readable key listing for --help epilogs (one key per line)."""
    lines = ["configuration keys (TOML '[section] key = default'; flags win over file):"]
    for section in sections:
        for key in valid_keys(section):
            default = CONFIG_SCHEMA[section][key]
            rendered = json.dumps(default) if not isinstance(default, str) else repr(default)
            lines.append(f"  [{section}] {key} = {rendered}")
    lines.append(f"environment: {DATA_ROOT_ENV} overrides [data] root")
    return "\n".join(lines)

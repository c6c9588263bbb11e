"""Runtime configuration shared by the CLI and the service.

Resolution precedence per field: explicit flag > environment variable
(HOST, PORT, DATA_DIR) > config file > built-in default. The winning source
is tracked per field so --verbose can print the provenance.

Relative paths are resolved against ``data_dir`` after merging.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

from .errors import InvalidParameterError

DEFAULTS: dict[str, Any] = {
    "host": "127.0.0.1",
    "port": 8000,
    "data_dir": ".",
    "checkpoint": "model.json",
    "index": "index.jsonl",
    "matrix": "matrix.json",
    "feedback": "feedback.jsonl",
    "train_data": None,
    "test_data": None,
    "top_k": 10,
    "k_estimate": 10,
    "learning_rate": 0.5,
    "batch_size": 32,
    "iterations": 300,
    "temperature": 0.01,
    "seed": 0,
    "init_seed": 0,
    "hidden_dims": [64],
    "embedding_dim": 16,
    "activation": "relu",
}

_ENV_FIELDS = {"HOST": "host", "PORT": "port", "DATA_DIR": "data_dir"}

_PATH_FIELDS = ("checkpoint", "index", "matrix", "feedback", "train_data", "test_data")


def resolve_config(
    config_path: str | None = None,
    flags: dict[str, Any] | None = None,
    environ: dict[str, str] | None = None,
) -> tuple[dict[str, Any], dict[str, str]]:
    """Merge defaults, file, environment, and flags; returns (config, provenance)."""
    environ = os.environ if environ is None else environ
    merged = dict(DEFAULTS)
    provenance = {key: "default" for key in DEFAULTS}

    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidParameterError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise InvalidParameterError(f"config {config_path} must hold a JSON object")
        for key, value in loaded.items():
            if key not in DEFAULTS:
                raise InvalidParameterError(f"unknown config field {key!r}")
            merged[key] = value
            provenance[key] = "file"

    for env_name, key in _ENV_FIELDS.items():
        if env_name in environ:
            value = environ[env_name]
            merged[key] = int(value) if key == "port" else value
            provenance[key] = "env"

    for key, value in (flags or {}).items():
        if value is None:
            continue
        if key not in DEFAULTS:
            raise InvalidParameterError(f"unknown config field {key!r}")
        merged[key] = value
        provenance[key] = "flag"

    data_dir = Path(merged["data_dir"])
    for key in _PATH_FIELDS:
        if merged[key] is not None:
            path = Path(merged[key])
            merged[key] = str(path if path.is_absolute() else data_dir / path)
    return merged, provenance


def format_provenance(config: dict[str, Any], provenance: dict[str, str]) -> str:
    width = max(len(key) for key in config)
    lines = [
        f"{key:<{width}}  = {config[key]!r}  [{provenance[key]}]" for key in sorted(config)
    ]
    return "\n".join(lines)

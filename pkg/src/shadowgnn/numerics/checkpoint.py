"""JSON checkpoints: parameter path -> shape + flat float64 data."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

FORMAT_VERSION = 1


class CheckpointMismatch(ValueError):
    pass


def save_checkpoint(path, params: dict[str, np.ndarray], meta: dict[str, Any] | None = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "meta": meta or {},
        "params": {
            name: {"shape": list(arr.shape), "data": np.asarray(arr, dtype=np.float64).ravel().tolist()}
            for name, arr in params.items()
        },
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc))
    tmp.replace(path)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointMismatch(f"{path}: unsupported checkpoint format_version {version!r}")
    params = {}
    for name, entry in doc["params"].items():
        shape = tuple(entry["shape"])
        data = np.asarray(entry["data"], dtype=np.float64)
        if data.size != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointMismatch(f"{path}: parameter {name!r} has {data.size} values for shape {shape}")
        params[name] = data.reshape(shape)
    return params, doc.get("meta", {})

"""Run configuration: JSON file plus ``key=value`` overrides."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Optional


@dataclass
class RunConfig:
    # data
    tables: Optional[str] = None
    train: Optional[str] = None
    dev: Optional[str] = None
    values: Optional[str] = None
    synthetic: int = 0
    # artifacts
    checkpoint: str = "runs/model.json"
    log_dir: Optional[str] = "runs"
    # model
    d: int = 512
    heads: int = 8
    bases: int = 8
    gpnn_layers: int = 4
    rat_layers: int = 4
    dropout: float = 0.3
    scaled: bool = False
    hash_buckets: int = 512
    # optimisation
    lr: float = 2e-4
    batch_size: int = 16
    epochs: int = 30
    seed: int = 0
    beam_size: int = 5
    time_limit: Optional[float] = None
    target_train_em: Optional[float] = None
    eval_every: int = 1

    def __post_init__(self):
        if self.gpnn_layers < 0 or self.rat_layers < 0:
            raise ValueError("gpnn_layers and rat_layers must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.synthetic < 0:
            raise ValueError("synthetic must be >= 0")

    @classmethod
    def load(cls, path=None, overrides: Iterable[str] = ()) -> "RunConfig":
        data: dict = {}
        if path is not None:
            data = json.loads(Path(path).read_text())
            if not isinstance(data, dict):
                raise ValueError(f"{path}: config must be a JSON object")
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep:
                raise ValueError(f"override {item!r} is not key=value")
            try:
                data[key.strip()] = json.loads(raw)
            except json.JSONDecodeError:
                data[key.strip()] = raw
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def estimator_params(self) -> dict:
        keys = (
            "d", "heads", "bases", "gpnn_layers", "rat_layers", "dropout", "scaled", "hash_buckets",
            "lr", "batch_size", "epochs", "seed", "beam_size", "time_limit", "target_train_em", "eval_every",
        )
        return {k: getattr(self, k) for k in keys}


def overfit_config(**overrides) -> RunConfig:
    """The desk-scale smoke setting: 50 synthetic examples, d=32, two layers of each kind, no dropout."""
    base = dict(
        synthetic=50, d=32, gpnn_layers=2, rat_layers=2, lr=2e-4, batch_size=16, dropout=0.0,
        epochs=1000, time_limit=600.0, target_train_em=0.95, eval_every=25, beam_size=1, log_dir=None,
    )
    base.update(overrides)
    return RunConfig(**base)

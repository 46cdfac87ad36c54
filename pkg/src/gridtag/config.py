"""Experiment configuration: one flat record, overridable from a JSON file
and again from CLI flags (flags win)."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

ENCODER_DEFAULT_TURNS = {"cnn": 2, "bilstm": 3}


@dataclass
class TrainConfig:
    task: str = "ope"  # ope | ote
    encoder: str = "bilstm"  # cnn | bilstm
    seed: int = 0
    learning_rate: float = 0.001
    batch_size: int = 32
    dropout: float = 0.5
    # None picks the per-encoder default (cnn: 2, bilstm: 3).
    inference_turns: int | None = None
    max_epochs: int = 100
    patience: int = 10
    # Optional early exit once dev F1 reaches this value.
    stop_f1: float | None = None
    general_dim: int = 300
    domain_dim: int = 100
    lstm_hidden: int = 50
    cnn_channels: int = 256
    cnn_layers: int = 4
    cnn_kernel: int = 5
    cnn_domain_kernel: int = 3
    attention: bool = True
    attention_dim: int | None = None
    # Pool row/column evidence without the cell's own distribution.
    evidence_excludes_self: bool = False
    # Divide each batch loss by the batch size instead of plain summing.
    normalize_loss: bool = False
    general_embeddings: str | None = None
    domain_embeddings: str | None = None

    def __post_init__(self) -> None:
        if self.task not in ("ope", "ote"):
            raise ValueError(f"task must be 'ope' or 'ote', got {self.task!r}")
        if self.encoder not in ("cnn", "bilstm"):
            raise ValueError(f"encoder must be 'cnn' or 'bilstm', got {self.encoder!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.inference_turns is not None and self.inference_turns < 0:
            raise ValueError("inference_turns must be >= 0")
        if self.general_dim < 1 or self.domain_dim < 0:
            raise ValueError("embedding dims must be positive (domain may be 0)")

    @property
    def resolved_turns(self) -> int:
        if self.inference_turns is not None:
            return self.inference_turns
        return ENCODER_DEFAULT_TURNS[self.encoder]

    @property
    def embedding_dim(self) -> int:
        return self.general_dim + self.domain_dim

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


def config_from_dict(values: dict) -> TrainConfig:
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return TrainConfig(**values)


def load_config(path: str | Path) -> TrainConfig:
    values = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(values, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return config_from_dict(values)

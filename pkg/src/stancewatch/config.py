"""Pipeline configuration: defaults, INI file, command-line overrides.

Resolution order for every key: command-line flag, then the config file,
then the built-in default. The defaults encode the reference training
setup (learning rate 5e-6, 25 epochs, Adam) so a bare run uses it as-is.
All randomness flows from the four seeds below; nothing reads the clock
or OS entropy.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .encoder import EncoderConfig
from .errors import DataValidationError, InputPathError
from .trainer import TrainConfig


@dataclass
class PipelineConfig:
    # paths
    labeled_path: str = ""
    corpus_path: str = ""
    vocab_path: str = ""
    checkpoint_path: str = ""
    classified_path: str = ""
    out_dir: str = "out"
    # tokenizer
    vocab_max_size: int = 4000
    min_pair_freq: int = 2
    # model
    d_model: int = 128
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 0
    max_len: int = 64
    dropout_rate: float = 0.1
    # train
    learning_rate: float = 5e-6
    epochs: int = 25
    batch_size: int = 16
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    head_only: bool = False
    class_weights: str = ""
    # split
    train_fraction: float = 0.8
    # inference
    eval_batch_size: int = 64
    classify_batch_size: int = 64
    # timeline
    utc_offset_minutes: int = 180
    min_prominence: float = 2.0
    top_k: int = 5
    smoothing_window: int = 0
    # seeds
    seed_split: int = 13
    seed_init: int = 17
    seed_shuffle: int = 23
    seed_dropout: int = 29


# key -> INI section; types come from the dataclass field annotations.
_SECTIONS = {
    "labeled_path": "paths",
    "corpus_path": "paths",
    "vocab_path": "paths",
    "checkpoint_path": "paths",
    "classified_path": "paths",
    "out_dir": "paths",
    "vocab_max_size": "tokenizer",
    "min_pair_freq": "tokenizer",
    "d_model": "model",
    "n_layers": "model",
    "n_heads": "model",
    "d_ff": "model",
    "max_len": "model",
    "dropout_rate": "model",
    "learning_rate": "train",
    "epochs": "train",
    "batch_size": "train",
    "beta1": "train",
    "beta2": "train",
    "adam_eps": "train",
    "head_only": "train",
    "class_weights": "train",
    "train_fraction": "split",
    "eval_batch_size": "inference",
    "classify_batch_size": "inference",
    "utc_offset_minutes": "timeline",
    "min_prominence": "timeline",
    "top_k": "timeline",
    "smoothing_window": "timeline",
    "seed_split": "seeds",
    "seed_init": "seeds",
    "seed_shuffle": "seeds",
    "seed_dropout": "seeds",
}

_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _parse_value(key: str, raw: str) -> Any:
    kind = _FIELD_TYPES[key]
    try:
        if kind == "bool":
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise DataValidationError(f"config key {key}: {exc}")


def parse_kv(key: str, raw: str) -> Any:
    """Parse one KEY=VALUE override with the key's declared type."""
    if key not in _FIELD_TYPES:
        raise DataValidationError(f"unknown config key: {key}")
    return _parse_value(key, raw)


def load_config(path: str | Path | None) -> PipelineConfig:
    """Defaults, overlaid with an INI file when one is given."""
    config = PipelineConfig()
    if path is None:
        return config
    p = Path(path)
    if not p.is_file():
        raise InputPathError(f"config file not found: {p}")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(p.read_text(encoding="utf-8"), source=str(p))
    except configparser.Error as exc:
        raise DataValidationError(f"cannot parse config file {p}: {exc}")
    for section in parser.sections():
        for key, raw in parser.items(section):
            if _SECTIONS.get(key) != section:
                raise DataValidationError(
                    f"unknown config key [{section}] {key} in {p}"
                )
            setattr(config, key, _parse_value(key, raw))
    return config


def apply_overrides(config: PipelineConfig, overrides: dict[str, Any]) -> PipelineConfig:
    """Overlay non-None command-line values onto the config."""
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise DataValidationError(f"unknown config key: {key}")
        setattr(config, key, value)
    return config


def config_snapshot(config: PipelineConfig) -> dict:
    """Stable dict for the run manifest, grouped by section."""
    snap: dict[str, dict] = {}
    for key, section in _SECTIONS.items():
        snap.setdefault(section, {})[key] = getattr(config, key)
    return snap


def parse_class_weights(raw: str) -> tuple[float, float, float, float] | None:
    if not raw.strip():
        return None
    parts = [s.strip() for s in raw.split(",")]
    if len(parts) != 4:
        raise DataValidationError(
            f"class_weights needs 4 comma-separated numbers, got {raw!r}"
        )
    try:
        return tuple(float(s) for s in parts)
    except ValueError:
        raise DataValidationError(f"class_weights must be numeric, got {raw!r}")


def encoder_config(config: PipelineConfig, vocab_size: int) -> EncoderConfig:
    return EncoderConfig(
        vocab_size=vocab_size,
        d_model=config.d_model,
        n_layers=config.n_layers,
        n_heads=config.n_heads,
        d_ff=config.d_ff,
        max_len=config.max_len,
        dropout_rate=config.dropout_rate,
    )


def train_config(config: PipelineConfig) -> TrainConfig:
    return TrainConfig(
        learning_rate=config.learning_rate,
        epochs=config.epochs,
        batch_size=config.batch_size,
        beta1=config.beta1,
        beta2=config.beta2,
        adam_eps=config.adam_eps,
        shuffle_seed=config.seed_shuffle,
        class_weights=parse_class_weights(config.class_weights),
        init_seed=config.seed_init,
        dropout_seed=config.seed_dropout,
        head_only=config.head_only,
    )

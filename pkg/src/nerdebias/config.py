"""Flat ``key = value`` run configuration with command-line overrides.

All keys live in :class:`RunConfig`. A config file may set any subset; flags
given on the command line win; :meth:`RunConfig.to_text` renders the resolved
values (every key, in field order) for echoing into the output directory.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Optional, Tuple

from .bias import KINDS, TemperatureConfig
from .ensemble import MODES, EnsembleConfig
from .errors import ConfigError
from .tagger import TaggerConfig

RESOLVED_NAME = "config.resolved"

# the flag that sets each path key, for error messages
FLAG = {"train": "--train", "dev": "--dev", "test": "--test", "vocab": "--vocab",
        "cui_file": "--cui-file", "output_dir": "--output-dir"}

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


@dataclass(frozen=True)
class RunConfig:
    # paths
    train: Optional[str] = None
    dev: Optional[str] = None
    test: Optional[str] = None
    vocab: Optional[str] = None
    cui_file: Optional[str] = None
    output_dir: Optional[str] = None
    # corpus and tokenizer
    max_len: int = 0  # 0 = never split sentences
    vocab_lowercase: bool = False
    # bias
    bias_kind: str = "pmi"
    k: float = 100.0
    smoothing: str = "joint"
    lam: float = 0.0
    length_unit: str = "words"
    class_collapse: bool = False
    word_freq_alpha: float = 1.0
    bias_seed: int = 0
    # tagger
    embed_dim: int = 16
    hidden_dim: int = 32
    context_window: int = 3
    decoder: str = "softmax"
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 32
    optimizer: str = "adam"
    loss_positions: str = "all"
    # ensemble
    mode: str = "none"
    entropy_weight: float = 0.2
    # partition
    typed_partition: bool = True
    lowercase_partition: bool = False
    # runs
    seeds: Tuple[int, ...] = (1,)
    record_time: bool = False
    checkpoint_every: int = 0

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must list at least one seed")
        if self.bias_kind not in KINDS:
            raise ConfigError(f"bias_kind must be one of {KINDS}, got {self.bias_kind!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.smoothing not in ("joint", "marginal"):
            raise ConfigError(f"smoothing must be 'joint' or 'marginal', got {self.smoothing!r}")
        if self.k < 0:
            raise ConfigError(f"k must be >= 0, got {self.k}")
        if self.max_len < 0:
            raise ConfigError("max_len must be >= 0")
        if self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be >= 0")
        self.temperature()  # validates lam / length_unit
        self.tagger_config(self.seeds[0])

    def temperature(self) -> TemperatureConfig:
        return TemperatureConfig(self.lam, self.length_unit)

    def ensemble_config(self) -> EnsembleConfig:
        return EnsembleConfig(self.mode, self.entropy_weight, self.temperature())

    def tagger_config(self, seed: int, num_classes: int = 1) -> TaggerConfig:
        return TaggerConfig(num_classes=num_classes, embed_dim=self.embed_dim, hidden_dim=self.hidden_dim,
                            context_window=self.context_window, decoder=self.decoder, seed=seed,
                            learning_rate=self.learning_rate, epochs=self.epochs, batch_size=self.batch_size,
                            optimizer=self.optimizer, loss_positions=self.loss_positions)

    def require(self, *keys: str) -> None:
        """Raise ConfigError naming the flag for a missing or nonexistent path."""
        for key in keys:
            value = getattr(self, key)
            if key == "output_dir":
                if not value:
                    raise ConfigError(f"missing required {FLAG[key]}")
                continue
            if not value:
                raise ConfigError(f"missing required {FLAG[key]}")
            if not Path(value).is_file():
                raise ConfigError(f"{FLAG[key]}: no such file: {value}")

    def optional_file(self, key: str) -> Optional[str]:
        value = getattr(self, key)
        if value and not Path(value).is_file():
            raise ConfigError(f"{FLAG[key]}: no such file: {value}")
        return value or None

    def to_text(self) -> str:
        lines = [f"{f.name} = {_render(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"


def _render(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(name: str, ftype: str, raw: str):
    raw = raw.strip()
    try:
        if ftype == "bool":
            if raw.lower() not in _BOOL:
                raise ValueError(raw)
            return _BOOL[raw.lower()]
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype.startswith("Tuple"):
            return tuple(int(s) for s in raw.replace(" ", "").split(",") if s)
        if ftype.startswith("Optional"):
            return raw or None
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {ftype}") from None


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_config_text(text: str, path=None) -> Dict[str, str]:
    """Raw ``key -> value`` strings; ``#`` starts a comment anywhere on a line."""
    out: Dict[str, str] = {}
    where = str(path) if path else "<config>"
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{where}:{lineno}: expected 'key = value'")
        if key not in _TYPES:
            raise ConfigError(f"{where}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{where}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_config_file(path) -> Dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"--config: no such file: {path}")
    return parse_config_text(p.read_text(encoding="utf-8"), p)


def resolve(file_values: Optional[Dict[str, str]] = None, overrides: Optional[Dict[str, object]] = None) -> RunConfig:
    """File values first, then non-None overrides (already typed or raw strings)."""
    kw = {}
    for key, raw in (file_values or {}).items():
        kw[key] = _coerce(key, _TYPES[key], raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r}")
        kw[key] = _coerce(key, _TYPES[key], value) if isinstance(value, str) else value
    return RunConfig(**kw)


def write_resolved(cfg: RunConfig, out_dir) -> Path:
    path = Path(out_dir) / RESOLVED_NAME
    path.write_text(cfg.to_text(), encoding="utf-8", newline="\n")
    return path

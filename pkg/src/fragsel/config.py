"""Run configuration and its flat ``key = value`` file format.

Example file::

    # demo settings
    n_ret = 100
    n_seg = 15
    k = 5
    collect_trace_nodes = false

Blank lines and ``#`` comments are ignored. Unknown keys are rejected so a
misspelled hyperparameter never silently falls back to its default.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class Config:
    n_ret: int = 100
    n_seg: int = 15
    k: int = 5
    tau_fig: float = 0.2
    tau_obj: float = 0.40
    tau_sem: float = 0.35
    tau_size: float = 2500.0
    alpha: float = 0.7
    temperature: float = 2.0
    image_token_cost: int = 256
    collect_trace_nodes: bool = False
    parallelism: int = 1
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 2e-5
    seed: int = 0

    def __post_init__(self):
        if self.n_ret < 1:
            raise ConfigError(f"n_ret must be positive, got {self.n_ret}")
        if not 0 <= self.n_seg <= self.n_ret:
            raise ConfigError(f"n_seg must lie in [0, n_ret={self.n_ret}], got {self.n_seg}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.tau_size <= 0:
            raise ConfigError(f"tau_size must be > 0, got {self.tau_size}")
        if self.image_token_cost < 0:
            raise ConfigError("image_token_cost must be non-negative")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ConfigError("epochs >= 0, batch_size >= 1 and learning_rate > 0 are required")

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(Config)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "bool":
            lowered = raw.lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None


def parse_config(text: str, base: Config | None = None) -> Config:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw)
    return dataclasses.replace(base or Config(), **values)


def load_config(path: str | Path, base: Config | None = None) -> Config:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base)


def dump_config(config: Config) -> str:
    lines = []
    for key, value in config.to_dict().items():
        text = str(value).lower() if isinstance(value, bool) else repr(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"

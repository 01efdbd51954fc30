"""Run configuration: dataclasses plus strict JSON / key-value loading.

A config document has the sections ``data``, ``model``, ``ot``, ``train``
and ``sweep`` (all optional) and a top-level ``seed``.  Unknown keys are an
error.  The key-value form uses dotted names, one per line::

    seed = 7
    train.alpha = 0.5
    sweep.lambda_grid = [0.1, 0.25]

Values are parsed as JSON when possible and kept as strings otherwise.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError

DEFAULT_GRID = (0.1, 0.25, 0.5, 0.75, 1.0)


@dataclass
class DataConfig:
    # "blobs" generates data; "files" reads the four *_path entries
    source: str = "blobs"
    n_classes: int = 3
    dim: int = 5
    separation: float = 10.0
    spread: float = 1.0
    labeled_per_class: int = 10
    unlabeled: int = 300
    validation: int = 300
    test: int = 1000
    format: str = "csv"
    labeled_path: str | None = None
    unlabeled_path: str | None = None
    validation_path: str | None = None
    test_path: str | None = None


@dataclass
class ModelConfig:
    hidden_dim: int = 32


@dataclass
class OTConfig:
    order_k: int = 2
    max_iter: int = 10_000
    tolerance: float = 1e-8
    log_domain: bool = True
    exact_inner: bool = False
    rooted_costs: bool = False
    cluster_inner_iters: int = 50
    step_theta: float = 1.0
    step_t0: float = 1.0
    # threads for the cluster-by-class distance matrix; the CLI pins this to 1
    # unless --no-deterministic is given
    workers: int = 1


@dataclass
class TrainConfig:
    alpha: float = 1.0
    lam: float = 0.25
    learning_rate: float = 3e-3
    batch_size: int = 100
    warmup_epochs: int = 100
    ssl_epochs: int = 100
    optimizer: str = "adaptive-moment"
    unlabeled_per_epoch: int | None = None
    # "rot", "gnn-ss", "gnn-sm" or "none"
    labeler: str = "rot"
    soft_labels: bool = False
    deterministic: bool = True

    def __post_init__(self):
        if self.alpha < 0 or self.lam < 0:
            raise ConfigError("alpha and lambda must be nonnegative")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.warmup_epochs < 0 or self.ssl_epochs < 0:
            raise ConfigError("epoch counts must be nonnegative")
        if self.labeler not in ("rot", "gnn-ss", "gnn-sm", "none"):
            raise ConfigError(f"unknown labeler {self.labeler!r}")
        if self.optimizer not in ("adaptive-moment", "adam", "plain-sgd", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class SweepConfig:
    lambda_grid: list[float] = field(default_factory=lambda: list(DEFAULT_GRID))
    alpha_grid: list[float] = field(default_factory=lambda: list(DEFAULT_GRID))
    validation_sizes: list[int] = field(default_factory=lambda: [50, 100, 500])
    repeats: int = 5

    def __post_init__(self):
        if not self.lambda_grid or not self.alpha_grid or not self.validation_sizes:
            raise ConfigError("sweep grids must be nonempty")
        if self.repeats < 1:
            raise ConfigError("sweep.repeats must be >= 1")
        if any(v < 1 for v in self.validation_sizes):
            raise ConfigError("validation sizes must be positive")


@dataclass
class RunConfig:
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    ot: OTConfig = field(default_factory=OTConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)


_SECTIONS = {"data": DataConfig, "model": ModelConfig, "ot": OTConfig, "train": TrainConfig, "sweep": SweepConfig}
# accepted spellings that are not valid Python identifiers
_ALIASES = {"lambda": "lam"}


def _build(cls, values: dict[str, Any], where: str):
    if not isinstance(values, dict):
        raise ConfigError(f"section {where!r} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        name = _ALIASES.get(key, key)
        if name not in names:
            raise ConfigError(f"unknown key {where}.{key}")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad values in {where}: {exc}") from None


def config_from_dict(doc: dict[str, Any]) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be an object")
    unknown = set(doc) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    sections = {name: _build(cls, doc.get(name, {}), name) for name, cls in _SECTIONS.items()}
    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return RunConfig(seed=seed, **sections)


def config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)


def _parse_kv(text: str) -> dict[str, Any]:
    doc: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        parts = key.split(".")
        if len(parts) == 1:
            doc[key] = parsed
        elif len(parts) == 2:
            doc.setdefault(parts[0], {})[parts[1]] = parsed
        else:
            raise ConfigError(f"line {lineno}: key {key!r} nests too deeply")
    return doc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    else:
        doc = _parse_kv(text)
    return config_from_dict(doc)

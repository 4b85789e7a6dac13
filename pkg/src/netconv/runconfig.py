"""Resolved run configuration: dataclass defaults, then a JSON file, then CLI flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from netconv.finetune import SCALABILITY_LENGTHS, FinetuneConfig
from netconv.ingest import IngestOptions, SynthSpec
from netconv.model import ModelConfig
from netconv.pretrain import PretrainConfig


@dataclass
class SynthOptions:
    num_classes: int = 4
    per_class: int = 100
    packets_per_flow: int = 5
    tokens_per_packet: int = 64
    field_offset: int = 19
    field_len: int = 16
    variants_per_class: int = 2
    short_flow_fraction: float = 0.0
    generate_width: Optional[int] = None
    template_seed: Optional[int] = None
    labeled: bool = True

    def spec(self, **overrides) -> SynthSpec:
        d = {k: v for k, v in asdict(self).items() if k != "labeled"}
        d.update(overrides)
        return SynthSpec(**d)


@dataclass
class BenchOptions:
    batch_sizes: list = field(default_factory=lambda: [1, 32, 1024])
    warmup: int = 2
    iters: int = 10
    lengths: list = field(default_factory=lambda: [256, 512, 1024, 2048, 4096])
    d_model: int = 64
    repeats: int = 3


@dataclass
class SweepOptions:
    shots: list = field(default_factory=lambda: [5, 10, 20])
    lengths: list = field(default_factory=lambda: list(SCALABILITY_LENGTHS))
    variants: Optional[list] = None


SECTIONS = {
    "model": ModelConfig,
    "pretrain": PretrainConfig,
    "finetune": FinetuneConfig,
    "ingest": IngestOptions,
    "synth": SynthOptions,
    "bench": BenchOptions,
    "sweep": SweepOptions,
}
TOP_LEVEL = ("seed", "threads")


class ConfigError(ValueError):
    pass


def _build(cls, values: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in config section: {sorted(unknown)}")
    return cls(**values)


@dataclass
class RunConfig:
    seed: int = 0
    threads: Optional[int] = None
    model: ModelConfig = field(default_factory=ModelConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)
    ingest: IngestOptions = field(default_factory=IngestOptions)
    synth: SynthOptions = field(default_factory=SynthOptions)
    bench: BenchOptions = field(default_factory=BenchOptions)
    sweep: SweepOptions = field(default_factory=SweepOptions)

    @classmethod
    def resolve(cls, file_values: dict | None = None, overrides: dict | None = None) -> "RunConfig":
        """Merge a parsed JSON document and ``{"section.key": value}`` overrides.

        The single seed is copied into every section that consumes randomness.
        """
        doc = {k: dict(v) if isinstance(v, dict) else v for k, v in (file_values or {}).items()}
        unknown = set(doc) - set(SECTIONS) - set(TOP_LEVEL)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        for key, value in (overrides or {}).items():
            if "." in key:
                section, name = key.split(".", 1)
                doc.setdefault(section, {})[name] = value
            else:
                doc[key] = value
        seed = int(doc.get("seed", 0))
        for section in ("pretrain", "finetune"):
            doc.setdefault(section, {})["seed"] = seed
        kwargs = {name: _build(SECTIONS[name], doc.get(name, {})) for name in SECTIONS}
        return cls(seed=seed, threads=doc.get("threads"), **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data

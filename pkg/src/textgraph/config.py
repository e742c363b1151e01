"""Hyperparameters and run configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any

DEFAULT_ENTITY_TYPES = ("person", "location", "organization", "event", "concept", "work", "other")


@dataclass(frozen=True)
class BeamConfig:
    beam_width: int = 20
    max_depth: int = 3
    max_neighbors: int = 30

    def __post_init__(self) -> None:
        if self.beam_width < 1 or self.max_depth < 1 or self.max_neighbors < 1:
            raise ValueError(f"beam parameters must be >= 1, got {self}")


@dataclass(frozen=True)
class SeedConfig:
    per_entity_top_k: int = 2
    min_similarity: float = 0.5
    fallback_top_k: int = 3


@dataclass(frozen=True)
class SynergyConfig:
    alpha: float = 0.5
    epsilon: float = 0.4
    gamma: float = 0.4
    lambda_e: float = 0.01
    lambda_r: float = 0.01
    k_r: int = 4
    k_o: int = 3

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        for name in ("epsilon", "gamma", "lambda_e", "lambda_r", "k_r", "k_o"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class BuildConfig:
    window: int = 1200
    overlap: int = 100
    entity_types: tuple[str, ...] = DEFAULT_ENTITY_TYPES
    language: str = "English"
    parallelism: int = 4
    retry_attempts: int = 3
    retry_base_delay: float = 0.5
    min_success_ratio: float = 0.9
    # "name" or "name_description"
    entity_embedding: str = "name"
    # prepend the document title to its text before chunking
    include_title: bool = True

    def __post_init__(self) -> None:
        if not self.window > self.overlap >= 0:
            raise ValueError("chunking needs window > overlap >= 0")
        if self.entity_embedding not in ("name", "name_description"):
            raise ValueError(f"unknown entity_embedding mode {self.entity_embedding!r}")


@dataclass(frozen=True)
class PipelineConfig:
    chunk_top_k: int = 5
    path_top_k: int = 5
    beam: BeamConfig = field(default_factory=BeamConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    synergy: SynergyConfig = field(default_factory=SynergyConfig)
    # ablation switches
    rerank: bool = True
    bridging: bool = True

    def __post_init__(self) -> None:
        if self.chunk_top_k < 1 or self.path_top_k < 1:
            raise ValueError("chunk_top_k and path_top_k must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PipelineConfig:
        data = dict(data)
        nested = {"beam": BeamConfig, "seeds": SeedConfig, "synergy": SynergyConfig}
        for key, typ in nested.items():
            if key in data and isinstance(data[key], dict):
                data[key] = typ(**data[key])
        return cls(**data)


# flat parameter name -> (section, field) for overrides and sweeps
PARAMETERS: dict[str, tuple[str | None, str]] = {
    "alpha": ("synergy", "alpha"),
    "epsilon": ("synergy", "epsilon"),
    "gamma": ("synergy", "gamma"),
    "lambda_e": ("synergy", "lambda_e"),
    "lambda_r": ("synergy", "lambda_r"),
    "k_r": ("synergy", "k_r"),
    "k_o": ("synergy", "k_o"),
    "beam_width": ("beam", "beam_width"),
    "depth": ("beam", "max_depth"),
    "max_neighbors": ("beam", "max_neighbors"),
    "chunk_top_k": (None, "chunk_top_k"),
    "path_top_k": (None, "path_top_k"),
}


def with_param(config: PipelineConfig, name: str, value: Any) -> PipelineConfig:
    """Return a copy of ``config`` with one flat parameter replaced."""
    try:
        section, attr = PARAMETERS[name]
    except KeyError:
        raise ValueError(f"unknown parameter {name!r}; choose from {sorted(PARAMETERS)}") from None
    if section is None:
        target = config
    else:
        target = getattr(config, section)
    current = getattr(target, attr)
    value = type(current)(value)
    if section is None:
        return replace(config, **{attr: value})
    return replace(config, **{section: replace(target, **{attr: value})})


def hyperparameters(config: PipelineConfig, dim: int) -> dict[str, Any]:
    """Flat snapshot of the tunable hyperparameters (symbol names as keys)."""
    snap = {name: getattr(config if sec is None else getattr(config, sec), attr)
            for name, (sec, attr) in PARAMETERS.items()}
    snap["dim"] = dim
    return snap


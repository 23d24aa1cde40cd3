"""Tunable knobs for the discovery pipeline.

Weights and thresholds are plain data so a service session can override
them per request and echo the effective values back to the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

DIMENSIONS = ("topic", "space", "time", "organization", "format", "license")

_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ScoringWeights:
    """Per-dimension weights for the relevance sum.

    The constructor rescales whatever it is given so the weights sum to
    one; all-zero weights are rejected because they cannot be rescaled.
    """

    topic: float = 0.3
    space: float = 0.2
    time: float = 0.2
    organization: float = 0.1
    format: float = 0.1
    license: float = 0.1

    def __post_init__(self) -> None:
        total = 0.0
        for f in fields(self):
            value = float(getattr(self, f.name))
            if value < 0.0:
                raise ValueError(f"weight {f.name} must be non-negative, got {value}")
            object.__setattr__(self, f.name, value)
            total += value
        if total <= 0.0:
            raise ValueError("scoring weights must not all be zero")
        if abs(total - 1.0) > _SUM_TOLERANCE:
            for f in fields(self):
                object.__setattr__(self, f.name, getattr(self, f.name) / total)

    def for_dimension(self, dimension: str) -> float:
        if dimension not in DIMENSIONS:
            raise KeyError(dimension)
        return getattr(self, dimension)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in DIMENSIONS}


@dataclass(frozen=True)
class PipelineConfig:
    """Session-scoped settings controlling every pipeline stage."""

    weights: ScoringWeights = field(default_factory=ScoringWeights)
    confidence_threshold: float = 0.5
    similarity_threshold: float = 0.7
    retrieval_size: int = 20
    answer_size: int = 10
    alpha: float = 0.5
    beta: float = 0.5
    execution_mode: str = "automatic"
    sources: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must lie in [0, 1]")
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must lie in [0, 1]")
        if self.retrieval_size < 1:
            raise ValueError("retrieval_size must be positive")
        if self.answer_size < 1:
            raise ValueError("answer_size must be positive")
        if self.answer_size > self.retrieval_size:
            raise ValueError("answer_size must not exceed retrieval_size")
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("alpha and beta must be non-negative")
        if abs(self.alpha + self.beta - 1.0) > _SUM_TOLERANCE:
            raise ValueError("alpha and beta must sum to one")
        if self.execution_mode not in ("automatic", "manual"):
            raise ValueError(f"unknown execution_mode {self.execution_mode!r}")
        if self.sources is not None:
            object.__setattr__(self, "sources", tuple(self.sources))

    def as_dict(self) -> dict:
        return {
            "weights": self.weights.as_dict(),
            "confidence_threshold": self.confidence_threshold,
            "similarity_threshold": self.similarity_threshold,
            "retrieval_size": self.retrieval_size,
            "answer_size": self.answer_size,
            "alpha": self.alpha,
            "beta": self.beta,
            "execution_mode": self.execution_mode,
            "sources": list(self.sources) if self.sources is not None else None,
        }

    def with_overrides(self, overrides: dict) -> "PipelineConfig":
        """Apply a partial override mapping, validating the result."""
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        changes = dict(overrides)
        if "weights" in changes and not isinstance(changes["weights"], ScoringWeights):
            changes["weights"] = ScoringWeights(**changes["weights"])
        if "sources" in changes and changes["sources"] is not None:
            changes["sources"] = tuple(changes["sources"])
        return replace(self, **changes)


def load_config(path: str | Path) -> PipelineConfig:
    """Read pipeline settings from a YAML file; absent keys keep defaults."""
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    return PipelineConfig().with_overrides(raw)

"""Entity and relationship vocabulary of the unified metadata graph.

Ten entity kinds with Dataset at the center, nine directed relationship kinds,
each with a fixed endpoint signature. Space and Time entities carry geometry;
attribute entities (Topic, Keyword, Organization, Format, License) may carry
unit-norm embeddings for similarity search.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import BBox, TimeInterval

EMBEDDING_NORM_TOL = 1e-6


class EntityKind(str, Enum):
    DATASET = "Dataset"
    TOPIC = "Topic"
    KEYWORD = "Keyword"
    SPACE = "Space"
    TIME = "Time"
    ORGANIZATION = "Organization"
    SOURCE = "Source"
    RESOURCE = "Resource"
    FORMAT = "Format"
    LICENSE = "License"


class RelationshipKind(str, Enum):
    HAS_TOPIC = "HAS_TOPIC"
    HAS_KEYWORD = "HAS_KEYWORD"
    HAS_SPACE = "HAS_SPACE"
    HAS_TIME = "HAS_TIME"
    HAS_FORMAT = "HAS_FORMAT"
    HAS_LICENSE = "HAS_LICENSE"
    HAS_RESOURCE = "HAS_RESOURCE"
    PUBLISHED_BY = "PUBLISHED_BY"
    PROVIDES = "PROVIDES"


#: Allowed (source kind, target kind) pairs per relationship kind. HAS_FORMAT
#: permits both Resource->Format and Dataset->Format since formats are usually
#: attached to distribution resources but may describe the dataset directly.
RELATIONSHIP_SIGNATURES: dict[RelationshipKind, frozenset[tuple[EntityKind, EntityKind]]] = {
    RelationshipKind.HAS_TOPIC: frozenset({(EntityKind.DATASET, EntityKind.TOPIC)}),
    RelationshipKind.HAS_KEYWORD: frozenset({(EntityKind.DATASET, EntityKind.KEYWORD)}),
    RelationshipKind.HAS_SPACE: frozenset({(EntityKind.DATASET, EntityKind.SPACE)}),
    RelationshipKind.HAS_TIME: frozenset({(EntityKind.DATASET, EntityKind.TIME)}),
    RelationshipKind.HAS_FORMAT: frozenset({
        (EntityKind.RESOURCE, EntityKind.FORMAT),
        (EntityKind.DATASET, EntityKind.FORMAT),
    }),
    RelationshipKind.HAS_LICENSE: frozenset({(EntityKind.DATASET, EntityKind.LICENSE)}),
    RelationshipKind.HAS_RESOURCE: frozenset({(EntityKind.DATASET, EntityKind.RESOURCE)}),
    RelationshipKind.PUBLISHED_BY: frozenset({(EntityKind.DATASET, EntityKind.ORGANIZATION)}),
    RelationshipKind.PROVIDES: frozenset({(EntityKind.SOURCE, EntityKind.DATASET)}),
}

#: Kinds whose labels get embedded for vector search.
EMBEDDABLE_KINDS = (
    EntityKind.TOPIC,
    EntityKind.KEYWORD,
    EntityKind.ORGANIZATION,
    EntityKind.FORMAT,
    EntityKind.LICENSE,
)


@dataclass
class Entity:
    """A node in the metadata graph.

    bbox is present exactly on Space entities, interval exactly on Time
    entities; embeddings must be unit length in the graph's dimension.
    """

    id: str
    kind: EntityKind
    label: str
    description: str | None = None
    url: str | None = None
    bbox: BBox | None = None
    interval: TimeInterval | None = None
    embedding: np.ndarray | None = None
    source_native_id: str | None = None
    enriched: bool = False

    def __post_init__(self) -> None:
        if (self.bbox is not None) != (self.kind is EntityKind.SPACE):
            raise ValueError(f"bbox is present iff kind is Space (got kind={self.kind.value})")
        if (self.interval is not None) != (self.kind is EntityKind.TIME):
            raise ValueError(f"interval is present iff kind is Time (got kind={self.kind.value})")
        if self.embedding is not None:
            norm = float(np.linalg.norm(self.embedding))
            if abs(norm - 1.0) > EMBEDDING_NORM_TOL:
                raise ValueError(f"embedding norm {norm} not within {EMBEDDING_NORM_TOL} of 1")


@dataclass(frozen=True)
class Relationship:
    """A directed typed edge; endpoint kinds must satisfy the kind signature."""

    kind: RelationshipKind
    from_id: str
    to_id: str


def check_signature(kind: RelationshipKind, from_kind: EntityKind, to_kind: EntityKind) -> bool:
    return (from_kind, to_kind) in RELATIONSHIP_SIGNATURES[kind]


@dataclass
class Subgraph:
    """Entities and relationships around one focus dataset, closed under endpoints."""

    focus: str
    entities: list[Entity] = field(default_factory=list)
    relationships: list[Relationship] = field(default_factory=list)

    def entity_ids(self) -> set[str]:
        return {e.id for e in self.entities}

    def is_closed(self) -> bool:
        ids = self.entity_ids()
        return all(r.from_id in ids and r.to_id in ids for r in self.relationships)


def canonical_label(label: str) -> str:
    """Merge key for shared attribute entities: case-folded, whitespace-normalized."""
    return " ".join(label.split()).casefold()

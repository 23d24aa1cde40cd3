"""Embedded property-graph store for the unified metadata ontology.

Single-writer during build and enrichment; after that the graph is treated
as immutable and every query primitive is safe for concurrent readers.
Shared attribute entities (Keyword, Format, License, Organization) merge on
their case-folded label, Space and Time merge on exact values, and Topics
merge only through the governance pass.
"""
from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from typing import Iterable, Iterator

from ..errors import IntegrityViolation, UnknownDataset
from ..geometry import BBox, TimeInterval, intersects
from ..ontology import (
    Entity,
    EntityKind,
    Relationship,
    RelationshipKind,
    Subgraph,
    canonical_label,
    check_signature,
)
from ..records import NormalizedRecord

SCHEMA_VERSION = "1"


def dataset_entity_id(source_id: str, native_id: str) -> str:
    return f"dataset:{source_id}::{native_id}"


def source_entity_id(source_id: str) -> str:
    return f"source:{source_id}"


def _label_entity_id(prefix: str, label: str) -> str:
    return f"{prefix}:{canonical_label(label)}"


def space_entity_id(bbox: BBox) -> str:
    return f"space:{bbox.west!r},{bbox.south!r},{bbox.east!r},{bbox.north!r}"


def time_entity_id(interval: TimeInterval) -> str:
    end = interval.end.isoformat() if interval.end is not None else "open"
    return f"time:{interval.begin.isoformat()}/{end}"


def _record_digest(rec: NormalizedRecord) -> str:
    """Content hash over the graph-relevant record fields."""
    payload = {
        "title": rec.title,
        "description": rec.description,
        "url": rec.url,
        "organization": rec.organization.title if rec.organization else None,
        "keywords": list(rec.keywords),
        "license": rec.license.title if rec.license else None,
        "space": rec.space.as_list() if rec.space else None,
        "time": [
            rec.time.begin.isoformat(),
            rec.time.end.isoformat() if rec.time.end else None,
        ] if rec.time else None,
        "resources": [[r.url, r.title, r.format] for r in rec.resources],
        "standard": rec.standard,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class GraphStore:
    def __init__(self, dimension: int, build_timestamp: datetime | None = None):
        self.dimension = dimension
        self.build_timestamp = build_timestamp or datetime.now(timezone.utc)
        self.entities: dict[str, Entity] = {}
        self.relationships: list[Relationship] = []
        self._rel_seen: set[tuple[str, str, str]] = set()
        self._out: dict[str, list[Relationship]] = {}
        self._in: dict[str, list[Relationship]] = {}
        self.provenance: dict[str, dict[str, str]] = {}
        self._dataset_digest: dict[str, str] = {}
        self.indexes = None  # set by build_indexes (graph.indexes.IndexSet)

    # --- structural primitives ---

    def add_entity(self, entity: Entity) -> Entity:
        """Insert or return the already-merged entity with this id."""
        existing = self.entities.get(entity.id)
        if existing is not None:
            return existing
        self.entities[entity.id] = entity
        self._invalidate_indexes()
        return entity

    def add_relationship(self, kind: RelationshipKind, from_id: str, to_id: str) -> None:
        key = (kind.value, from_id, to_id)
        if key in self._rel_seen:
            return
        from_entity = self.entities.get(from_id)
        to_entity = self.entities.get(to_id)
        if from_entity is None or to_entity is None:
            raise IntegrityViolation(f"relationship endpoint missing: {from_id} -> {to_id}")
        if not check_signature(kind, from_entity.kind, to_entity.kind):
            raise IntegrityViolation(
                f"{kind.value} forbids {from_entity.kind.value} -> {to_entity.kind.value}")
        rel = Relationship(kind, from_id, to_id)
        self._rel_seen.add(key)
        self.relationships.append(rel)
        self._out.setdefault(from_id, []).append(rel)
        self._in.setdefault(to_id, []).append(rel)
        self._invalidate_indexes()

    def remove_entity(self, entity_id: str) -> None:
        """Drop an entity and every relationship touching it (topic governance)."""
        self.entities.pop(entity_id, None)
        keep = [r for r in self.relationships
                if r.from_id != entity_id and r.to_id != entity_id]
        dropped = [r for r in self.relationships
                   if r.from_id == entity_id or r.to_id == entity_id]
        self.relationships = keep
        for rel in dropped:
            self._rel_seen.discard((rel.kind.value, rel.from_id, rel.to_id))
            self._out[rel.from_id] = [r for r in self._out.get(rel.from_id, []) if r is not rel]
            self._in[rel.to_id] = [r for r in self._in.get(rel.to_id, []) if r is not rel]
        self._invalidate_indexes()

    def _invalidate_indexes(self) -> None:
        self.indexes = None

    def out_edges(self, entity_id: str, kind: RelationshipKind | None = None) -> list[Relationship]:
        edges = self._out.get(entity_id, [])
        return edges if kind is None else [r for r in edges if r.kind is kind]

    def in_edges(self, entity_id: str, kind: RelationshipKind | None = None) -> list[Relationship]:
        edges = self._in.get(entity_id, [])
        return edges if kind is None else [r for r in edges if r.kind is kind]

    def entities_of_kind(self, kind: EntityKind) -> Iterator[Entity]:
        return (e for e in self.entities.values() if e.kind is kind)

    def dataset_ids(self) -> list[str]:
        return [e.id for e in self.entities.values() if e.kind is EntityKind.DATASET]

    # --- ingest ---

    def ingest_record(self, rec: NormalizedRecord) -> str:
        """Map one record onto the ontology; idempotent for identical content."""
        did = dataset_entity_id(rec.source_id, rec.native_id)
        digest = _record_digest(rec)
        if did in self.entities:
            if self._dataset_digest.get(did) != digest:
                raise IntegrityViolation(
                    f"dataset {did} already ingested with different content")
            return did

        self.add_entity(Entity(
            id=did,
            kind=EntityKind.DATASET,
            label=rec.title,
            description=rec.description or None,
            url=rec.url,
            source_native_id=rec.native_id,
        ))
        self._dataset_digest[did] = digest
        if rec.raw_provenance:
            self.provenance[did] = dict(rec.raw_provenance)

        sid = source_entity_id(rec.source_id)
        self.add_entity(Entity(id=sid, kind=EntityKind.SOURCE, label=rec.source_id))
        self.add_relationship(RelationshipKind.PROVIDES, sid, did)

        if rec.organization is not None:
            oid = _label_entity_id("org", rec.organization.title)
            self.add_entity(Entity(
                id=oid, kind=EntityKind.ORGANIZATION, label=rec.organization.title,
                description=rec.organization.description or None,
            ))
            self.add_relationship(RelationshipKind.PUBLISHED_BY, did, oid)

        for keyword in rec.keywords:
            kid = _label_entity_id("keyword", keyword)
            self.add_entity(Entity(id=kid, kind=EntityKind.KEYWORD, label=keyword))
            self.add_relationship(RelationshipKind.HAS_KEYWORD, did, kid)

        if rec.license is not None:
            lid = _label_entity_id("license", rec.license.title)
            self.add_entity(Entity(id=lid, kind=EntityKind.LICENSE, label=rec.license.title))
            self.add_relationship(RelationshipKind.HAS_LICENSE, did, lid)

        if rec.space is not None:
            self.attach_space(did, rec.space, enriched=False)
        if rec.time is not None:
            self.attach_time(did, rec.time, enriched=False)

        for i, res in enumerate(rec.resources):
            rid = f"resource:{rec.source_id}::{rec.native_id}/{i}"
            self.add_entity(Entity(
                id=rid, kind=EntityKind.RESOURCE, label=res.title or res.url,
                description=res.description or None, url=res.url,
            ))
            self.add_relationship(RelationshipKind.HAS_RESOURCE, did, rid)
            if res.format and res.format.strip():
                fid = _label_entity_id("format", res.format)
                self.add_entity(Entity(id=fid, kind=EntityKind.FORMAT, label=res.format))
                self.add_relationship(RelationshipKind.HAS_FORMAT, rid, fid)
                self.add_relationship(RelationshipKind.HAS_FORMAT, did, fid)

        return did

    def attach_space(self, dataset_id: str, bbox: BBox, enriched: bool) -> str:
        eid = space_entity_id(bbox)
        entity = self.add_entity(Entity(
            id=eid, kind=EntityKind.SPACE, label=eid.removeprefix("space:"),
            bbox=bbox, enriched=enriched,
        ))
        if enriched:
            entity.enriched = True
        self.add_relationship(RelationshipKind.HAS_SPACE, dataset_id, eid)
        return eid

    def attach_time(self, dataset_id: str, interval: TimeInterval, enriched: bool) -> str:
        eid = time_entity_id(interval)
        entity = self.add_entity(Entity(
            id=eid, kind=EntityKind.TIME, label=eid.removeprefix("time:"),
            interval=interval, enriched=enriched,
        ))
        if enriched:
            entity.enriched = True
        self.add_relationship(RelationshipKind.HAS_TIME, dataset_id, eid)
        return eid

    # --- per-dataset accessors ---

    def dataset_space(self, dataset_id: str) -> BBox | None:
        for rel in self.out_edges(dataset_id, RelationshipKind.HAS_SPACE):
            return self.entities[rel.to_id].bbox
        return None

    def dataset_time(self, dataset_id: str) -> TimeInterval | None:
        for rel in self.out_edges(dataset_id, RelationshipKind.HAS_TIME):
            return self.entities[rel.to_id].interval
        return None

    def dataset_source(self, dataset_id: str) -> str | None:
        for rel in self.in_edges(dataset_id, RelationshipKind.PROVIDES):
            return self.entities[rel.from_id].label
        return None

    def datasets_missing(self, dimension: str) -> list[str]:
        """Dataset ids lacking a Space ('space') or Time ('time') entity."""
        rel = {"space": RelationshipKind.HAS_SPACE, "time": RelationshipKind.HAS_TIME}[dimension]
        return [did for did in self.dataset_ids() if not self.out_edges(did, rel)]

    # --- retrieval primitives ---

    def datasets_linked_to(
        self,
        entity_ids: Iterable[str],
        via: set[RelationshipKind] | None = None,
    ) -> set[str]:
        """Datasets one hop from any listed entity (Format also via Resource)."""
        found: set[str] = set()
        for eid in entity_ids:
            if eid not in self.entities:
                continue
            for rel in self.in_edges(eid):
                if via is not None and rel.kind not in via:
                    continue
                neighbor = self.entities[rel.from_id]
                if neighbor.kind is EntityKind.DATASET:
                    found.add(neighbor.id)
                elif neighbor.kind is EntityKind.RESOURCE and rel.kind is RelationshipKind.HAS_FORMAT:
                    for owner in self.in_edges(neighbor.id, RelationshipKind.HAS_RESOURCE):
                        found.add(owner.from_id)
            for rel in self.out_edges(eid):
                if via is not None and rel.kind not in via:
                    continue
                neighbor = self.entities[rel.to_id]
                if neighbor.kind is EntityKind.DATASET:
                    found.add(neighbor.id)
        return found

    def spatial_filter(self, candidates: Iterable[str], query: BBox) -> set[str]:
        """Keep candidates whose Space intersects; no Space means dropped."""
        kept = set()
        for did in candidates:
            box = self.dataset_space(did)
            if box is not None and intersects(box, query):
                kept.add(did)
        return kept

    def temporal_filter(self, candidates: Iterable[str], query: TimeInterval) -> set[str]:
        """Keep candidates whose Time intersects; open ends clamp to build time."""
        query = query.closed(self.build_timestamp) if query.is_open else query
        kept = set()
        for did in candidates:
            span = self.dataset_time(did)
            if span is None:
                continue
            span = span.closed(self.build_timestamp)
            if intersects(span, query):
                kept.add(did)
        return kept

    def source_filter(self, candidates: Iterable[str], sources: Iterable[str]) -> set[str]:
        allowed = set(sources)
        return {did for did in candidates if self.dataset_source(did) in allowed}

    def extract_subgraph(self, dataset_id: str) -> Subgraph:
        """The dataset, its direct neighbors, and Resource-attached Formats."""
        focus = self.entities.get(dataset_id)
        if focus is None or focus.kind is not EntityKind.DATASET:
            raise UnknownDataset(dataset_id)
        rels: list[Relationship] = []
        ids: dict[str, None] = {dataset_id: None}
        for rel in self.out_edges(dataset_id) + self.in_edges(dataset_id):
            rels.append(rel)
            ids.setdefault(rel.from_id, None)
            ids.setdefault(rel.to_id, None)
        for eid in list(ids):
            if self.entities[eid].kind is EntityKind.RESOURCE:
                for rel in self.out_edges(eid, RelationshipKind.HAS_FORMAT):
                    rels.append(rel)
                    ids.setdefault(rel.to_id, None)
        ordered = sorted(rels, key=lambda r: (r.kind.value, r.from_id, r.to_id))
        return Subgraph(
            focus=dataset_id,
            entities=[self.entities[i] for i in ids],
            relationships=ordered,
        )

    # --- integrity / indexes ---

    def check_integrity(self) -> None:
        """Full-scan assertions: endpoints exist, signatures hold, one source each."""
        for rel in self.relationships:
            if rel.from_id not in self.entities or rel.to_id not in self.entities:
                raise IntegrityViolation(f"dangling endpoint in {rel}")
            if not check_signature(rel.kind, self.entities[rel.from_id].kind,
                                   self.entities[rel.to_id].kind):
                raise IntegrityViolation(f"signature violated by {rel}")
        for did in self.dataset_ids():
            providers = self.in_edges(did, RelationshipKind.PROVIDES)
            if len(providers) != 1:
                raise IntegrityViolation(
                    f"dataset {did} has {len(providers)} PROVIDES edges, expected 1")

    def build_indexes(self) -> dict:
        from .indexes import IndexSet  # local import to avoid a cycle

        self.indexes = IndexSet.build(self)
        return self.indexes.manifest()

    def ensure_indexes(self):
        if self.indexes is None:
            self.build_indexes()
        return self.indexes

    def vector_search(self, kind: EntityKind, query, threshold: float, k: int):
        """Entities of ``kind`` with cosine >= threshold, best k, ties by id."""
        return self.ensure_indexes().vector_search(kind, query, threshold, k)

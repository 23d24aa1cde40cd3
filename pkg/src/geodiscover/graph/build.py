"""Graph construction passes that run after record ingest.

Order matters: attribute embedding, topic generation, topic governance,
spatiotemporal enrichment, then index build. Every pass is idempotent and
iterates datasets in sorted id order so rebuilds are deterministic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..errors import DimensionMismatch, ProviderFailure
from ..geometry import BBox, TimeInterval
from ..ontology import EMBEDDABLE_KINDS, Entity, EntityKind, RelationshipKind, canonical_label
from ..providers.embedding import EmbeddingProvider
from ..providers.geocoding import Geocoder
from ..providers.llm import LlmProvider, call_with_retries
from ..providers.tasks import SpaceTimeExtraction, TopicGeneration
from ..providers.timetext import parse_time_text, widen_begin, widen_end
from .store import GraphStore


def embed_attribute_entities(store: GraphStore, embedder: EmbeddingProvider) -> int:
    """Fill missing embeddings on every embeddable entity; returns how many."""
    if embedder.dimension != store.dimension:
        raise DimensionMismatch(
            f"embedder dimension {embedder.dimension} vs graph {store.dimension}")
    count = 0
    for kind in EMBEDDABLE_KINDS:
        for entity in sorted(store.entities_of_kind(kind), key=lambda e: e.id):
            if entity.embedding is None:
                entity.embedding = embedder.embed(entity.label)
                count += 1
    if count:
        store._invalidate_indexes()
    return count


@dataclass
class TopicReport:
    generated: list[tuple[str, tuple[str, ...]]] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (dataset id, reason)


def generate_topics(
    store: GraphStore,
    dataset_ids: Iterable[str],
    llm: LlmProvider,
    embedder: EmbeddingProvider,
) -> TopicReport:
    """Attach 1-5 LLM-generated topic labels to each dataset."""
    report = TopicReport()
    for did in sorted(dataset_ids):
        dataset = store.entities[did]
        task = TopicGeneration(title=dataset.label, description=dataset.description or "")
        try:
            labels = call_with_retries(lambda t=task: llm.complete(t)).topics
        except ProviderFailure as exc:
            report.skipped.append((did, str(exc)))
            continue
        for label in labels:
            tid = f"topic:{canonical_label(label)}"
            store.add_entity(Entity(
                id=tid, kind=EntityKind.TOPIC, label=label,
                embedding=embedder.embed(label),
            ))
            store.add_relationship(RelationshipKind.HAS_TOPIC, did, tid)
        report.generated.append((did, labels))
    return report


@dataclass
class MergeReport:
    merges: list[tuple[str, list[str]]] = field(default_factory=list)  # (kept, absorbed)

    def absorbed_count(self) -> int:
        return sum(len(gone) for _, gone in self.merges)


def deduplicate_topics(store: GraphStore, merge_threshold: float = 0.95) -> MergeReport:
    """Single-linkage merge of topics with pairwise cosine >= threshold.

    The lexicographically smallest topic id in each cluster survives and
    inherits every HAS_TOPIC edge of the topics it absorbs.
    """
    topics = sorted(
        (e for e in store.entities_of_kind(EntityKind.TOPIC) if e.embedding is not None),
        key=lambda e: e.id,
    )
    report = MergeReport()
    if len(topics) < 2:
        return report

    matrix = np.stack([t.embedding for t in topics]).astype(np.float64)
    similarity = matrix @ matrix.T

    parent = list(range(len(topics)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    rows, cols = np.nonzero(similarity >= merge_threshold)
    for i, j in zip(rows.tolist(), cols.tolist()):
        if i < j:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    clusters: dict[int, list[int]] = {}
    for i in range(len(topics)):
        clusters.setdefault(find(i), []).append(i)

    for root, members in sorted(clusters.items()):
        if len(members) < 2:
            continue
        keeper = topics[root]
        absorbed: list[str] = []
        for m in members:
            if m == root:
                continue
            gone = topics[m]
            for rel in list(store.in_edges(gone.id, RelationshipKind.HAS_TOPIC)):
                store.add_relationship(RelationshipKind.HAS_TOPIC, rel.from_id, keeper.id)
            store.remove_entity(gone.id)
            absorbed.append(gone.id)
        report.merges.append((keeper.id, absorbed))
    return report


@dataclass
class EnrichmentReport:
    examined: int = 0
    space_added: list[str] = field(default_factory=list)
    time_added: list[str] = field(default_factory=list)
    unresolved: list[str] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)


def _bbox_from_structured(text: str) -> BBox | None:
    """Recover a bbox from a GeoJSON geometry or a bare [w,s,e,n] array."""
    try:
        payload = json.loads(text)
    except (json.JSONDecodeError, TypeError):
        return None
    if isinstance(payload, list) and len(payload) == 4:
        try:
            return BBox(*[float(v) for v in payload])
        except (TypeError, ValueError):
            return None
    if not isinstance(payload, dict):
        return None
    coords = payload.get("coordinates")
    if coords is None:
        return None
    points: list[tuple[float, float]] = []

    def walk(node) -> None:
        if (isinstance(node, list) and len(node) >= 2
                and all(isinstance(v, (int, float)) for v in node[:2])):
            points.append((float(node[0]), float(node[1])))
        elif isinstance(node, list):
            for child in node:
                walk(child)

    walk(coords)
    if not points:
        return None
    lons = [p[0] for p in points]
    lats = [p[1] for p in points]
    try:
        return BBox(min(lons), min(lats), max(lons), max(lats))
    except ValueError:
        return None


def _interval_from_draft(begin: str | None, end: str | None) -> TimeInterval | None:
    if not begin and not end:
        return None
    try:
        begin_dt = widen_begin(begin) if begin else None
        end_dt = widen_end(end) if end else None
    except (ValueError, TypeError):
        return None
    if begin_dt is None:
        return None
    try:
        return TimeInterval(begin_dt, end_dt)
    except ValueError:
        return None


def enrich_spacetime(
    store: GraphStore,
    llm: LlmProvider,
    geocoder: Geocoder,
) -> EnrichmentReport:
    """Fill missing Space/Time from provenance, then LLM extraction + geocoding.

    New entities are tagged enriched=true. Per-dataset failures are logged in
    the report and never abort the pass.
    """
    report = EnrichmentReport()
    missing_space = set(store.datasets_missing("space"))
    missing_time = set(store.datasets_missing("time"))
    for did in sorted(missing_space | missing_time):
        report.examined += 1
        needs_space = did in missing_space
        needs_time = did in missing_time
        prov = store.provenance.get(did, {})

        # Pass 1: structured fields the parser kept but could not map.
        if needs_space:
            box = None
            if "extras[spatial]" in prov:
                box = _bbox_from_structured(prov["extras[spatial]"])
            if box is None and "idinfo.keywords.place" in prov:
                for place in prov["idinfo.keywords.place"].split(";"):
                    box = geocoder.geocode(place)
                    if box is not None:
                        break
            if box is not None:
                store.attach_space(did, box, enriched=True)
                report.space_added.append(did)
                needs_space = False
        if needs_time:
            interval = None
            for key, value in prov.items():
                if any(cue in key.lower() for cue in ("temporal", "date", "time")):
                    interval = parse_time_text(value)
                    if interval is not None:
                        break
            if interval is not None:
                store.attach_time(did, interval, enriched=True)
                report.time_added.append(did)
                needs_time = False

        # Pass 2: LLM extraction over the dataset's own text, then geocoding.
        if needs_space or needs_time:
            dataset = store.entities[did]
            task = SpaceTimeExtraction(title=dataset.label, description=dataset.description or "")
            try:
                draft = call_with_retries(lambda t=task: llm.complete(t))
            except ProviderFailure as exc:
                report.failures.append((did, str(exc)))
                report.unresolved.append(did)
                continue
            if needs_space and draft.place_name:
                box = geocoder.geocode(draft.place_name)
                if box is not None:
                    store.attach_space(did, box, enriched=True)
                    report.space_added.append(did)
                    needs_space = False
            if needs_time:
                interval = _interval_from_draft(draft.begin, draft.end)
                if interval is not None:
                    store.attach_time(did, interval, enriched=True)
                    report.time_added.append(did)
                    needs_time = False

        if needs_space or needs_time:
            report.unresolved.append(did)
    return report

"""Entity matching and graph retrieval with weighted multi-dimension scoring."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ProviderFailure, UnscriptedTask
from ..geometry import bbox_area, spatial_f1, temporal_f1
from ..graph.store import GraphStore
from ..ontology import EntityKind
from ..providers.embedding import EmbeddingProvider
from ..providers.llm import LlmProvider, call_with_retries
from ..providers.tasks import EntityValidation
from .config import DIMENSIONS, PipelineConfig
from .intent import GeoIntent

# Upper bound on vector-search hits per (dimension, kind) pair. The
# similarity threshold does the real filtering; this only caps runaway
# candidate lists on very large graphs.
ENTITY_SEARCH_LIMIT = 128

# Keyword entities participate in the topic dimension alongside topics.
_DIMENSION_KINDS: dict[str, tuple[EntityKind, ...]] = {
    "topic": (EntityKind.TOPIC, EntityKind.KEYWORD),
    "organization": (EntityKind.ORGANIZATION,),
    "format": (EntityKind.FORMAT,),
    "license": (EntityKind.LICENSE,),
}

TEXT_DIMENSIONS = tuple(_DIMENSION_KINDS)


@dataclass(frozen=True)
class CandidateEntity:
    """A graph entity matched against one intent dimension."""

    entity_id: str
    kind: EntityKind
    dimension: str
    label: str
    cosine: float
    validated: bool = True

    def as_dict(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "kind": self.kind.value,
            "dimension": self.dimension,
            "label": self.label,
            "cosine": self.cosine,
            "validated": self.validated,
        }


@dataclass(frozen=True)
class RelevanceScore:
    """One dimension's contribution to a dataset's relevance."""

    dimension: str
    score: float
    weight: float
    entity_id: str | None = None
    detail: dict = field(default_factory=dict)

    @property
    def weighted(self) -> float:
        return self.weight * self.score

    def as_dict(self) -> dict:
        out = {
            "dimension": self.dimension,
            "score": self.score,
            "weight": self.weight,
            "entity": self.entity_id,
        }
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass(frozen=True)
class ScoredDataset:
    """A ranked dataset with its full per-dimension evidence."""

    dataset_id: str
    title: str
    source_id: str | None
    raw: float
    normalized: float
    rank: int
    contributions: dict[str, RelevanceScore]

    def as_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "title": self.title,
            "source": self.source_id,
            "raw": self.raw,
            "normalized": self.normalized,
            "rank": self.rank,
            "scores": {d: c.as_dict() for d, c in self.contributions.items()},
        }


def match_entities(
    store: GraphStore,
    embedder: EmbeddingProvider,
    cfg: PipelineConfig,
    intent: GeoIntent,
) -> list[CandidateEntity]:
    """Embed each textual constraint and search the matching entity kinds."""
    store.ensure_indexes()
    matched: list[CandidateEntity] = []
    for dimension, kinds in _DIMENSION_KINDS.items():
        text = intent.texts.get(dimension)
        if not text:
            continue
        query = embedder.embed(text)
        for kind in kinds:
            for entity_id, cosine in store.vector_search(
                kind, query, cfg.similarity_threshold, ENTITY_SEARCH_LIMIT
            ):
                matched.append(
                    CandidateEntity(
                        entity_id=entity_id,
                        kind=kind,
                        dimension=dimension,
                        label=store.entities[entity_id].label,
                        cosine=float(cosine),
                    )
                )
    return matched


def validate_candidates(
    llm: LlmProvider, intent: GeoIntent, candidates: list[CandidateEntity]
) -> list[CandidateEntity]:
    """Let the model drop spurious matches; keep everything when it cannot.

    Validation is assistive, so an unscripted task or a provider outage
    leaves the candidate list untouched rather than failing the query.
    """
    if not candidates:
        return []
    task = EntityValidation(
        intent=dict(intent.texts),
        candidates=tuple(
            {
                "id": c.entity_id,
                "kind": c.kind.value,
                "label": c.label,
                "dimension": c.dimension,
                "cosine": c.cosine,
            }
            for c in candidates
        ),
    )
    try:
        result = call_with_retries(lambda: llm.complete(task))
    except (UnscriptedTask, ProviderFailure):
        return list(candidates)
    keep = set(result.keep)
    return [replace(c, validated=c.entity_id in keep) for c in candidates]


def apply_selection(
    candidates: list[CandidateEntity], keep_ids: list[str]
) -> list[CandidateEntity]:
    """Apply a user's manual candidate selection."""
    known = {c.entity_id for c in candidates}
    stray = set(keep_ids) - known
    if stray:
        raise ValueError(f"unknown candidate ids: {sorted(stray)}")
    keep = set(keep_ids)
    return [replace(c, validated=c.entity_id in keep) for c in candidates]


def _apply_hard_filters(
    store: GraphStore, intent: GeoIntent, pool: list[str]
) -> list[str]:
    """Drop candidates violating stated space, time, or source constraints.

    Uses the prebuilt entity index masks so the common path stays array
    work; a dataset missing a constrained dimension is dropped.
    """
    indexes = store.ensure_indexes()
    if intent.space is not None:
        mask = indexes.spatial.intersect_mask(intent.space.bbox)
        row_of = indexes.spatial.row_of
        space_of = indexes.space_of
        pool = [
            did
            for did in pool
            if (sid := space_of.get(did)) is not None and mask[row_of[sid]]
        ]
    if intent.time is not None:
        mask = indexes.temporal.intersect_mask(intent.time.interval, indexes.clamp)
        row_of = indexes.temporal.row_of
        time_of = indexes.time_of
        pool = [
            did
            for did in pool
            if (tid := time_of.get(did)) is not None and mask[row_of[tid]]
        ]
    if intent.sources is not None:
        allowed = set(intent.sources)
        pool = [did for did in pool if store.dataset_source(did) in allowed]
    return pool


def _harmonic(precision: np.ndarray, recall: np.ndarray) -> np.ndarray:
    denom = precision + recall
    with np.errstate(divide="ignore", invalid="ignore"):
        f1 = np.where(denom > 0.0, 2.0 * precision * recall / denom, 0.0)
    return f1


def _spatial_scores(
    store: GraphStore, intent: GeoIntent, pool: list[str]
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str | None]]:
    """Vectorized coverage F1 of every pooled dataset against the intent bbox."""
    indexes = store.ensure_indexes()
    query = intent.space.bbox
    query_area = bbox_area(query)
    entities = [indexes.space_of[did] for did in pool]
    if query_area == 0.0:
        # Degenerate query regions fall back to the scalar rules.
        scores = [spatial_f1(store.dataset_space(did), query) for did in pool]
        f1 = np.asarray([s.f1 for s in scores])
        p = np.asarray([s.precision for s in scores])
        r = np.asarray([s.recall for s in scores])
        return f1, p, r, entities

    rows = np.asarray([indexes.spatial.row_of[sid] for sid in entities], dtype=np.intp)
    overlap = indexes.spatial.overlap_area(query)[rows]
    area = indexes.spatial.area[rows]
    with np.errstate(divide="ignore", invalid="ignore"):
        # Hard filters already guarantee intersection, so a zero-area
        # dataset footprint scores precision 1 per the degenerate rules.
        precision = np.where(area > 0.0, overlap / np.where(area > 0.0, area, 1.0), 1.0)
    recall = overlap / query_area
    f1 = np.where(area > 0.0, _harmonic(precision, recall), 0.0)
    return f1, precision, recall, entities


def _temporal_scores(
    store: GraphStore, intent: GeoIntent, pool: list[str]
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str | None]]:
    """Vectorized coverage F1 of every pooled dataset against the intent interval."""
    indexes = store.ensure_indexes()
    query = intent.time.interval
    closed_query = query.closed(indexes.clamp)
    query_duration = closed_query.duration_seconds()
    entities = [indexes.time_of[did] for did in pool]
    if query_duration == 0.0:
        scores = [
            temporal_f1(store.dataset_time(did), query, clamp=indexes.clamp)
            for did in pool
        ]
        f1 = np.asarray([s.f1 for s in scores])
        p = np.asarray([s.precision for s in scores])
        r = np.asarray([s.recall for s in scores])
        return f1, p, r, entities

    rows = np.asarray([indexes.temporal.row_of[tid] for tid in entities], dtype=np.intp)
    overlap = indexes.temporal.overlap_seconds(query, indexes.clamp)[rows]
    duration = indexes.temporal.duration_s[rows]
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(
            duration > 0.0, overlap / np.where(duration > 0.0, duration, 1.0), 1.0
        )
    recall = overlap / query_duration
    f1 = np.where(duration > 0.0, _harmonic(precision, recall), 0.0)
    return f1, precision, recall, entities


def retrieve_and_score(
    store: GraphStore,
    cfg: PipelineConfig,
    intent: GeoIntent,
    candidates: list[CandidateEntity],
) -> list[ScoredDataset]:
    """Rank datasets linked to the validated candidates.

    The initial pool is every dataset linked to a topic-dimension
    candidate (or all datasets for a topic-free browse), cut down by the
    hard filters, then scored as the weighted sum of per-dimension
    similarities. Absent intent dimensions contribute zero without any
    weight redistribution. Scores are normalized by the pool maximum and
    the Top K returned, ties broken by dataset id.
    """
    valid = [c for c in candidates if c.validated]
    by_dimension: dict[str, list[CandidateEntity]] = {}
    for c in valid:
        by_dimension.setdefault(c.dimension, []).append(c)

    if intent.topic is not None:
        topic_candidates = by_dimension.get("topic", [])
        if not topic_candidates:
            return []
        pool = store.datasets_linked_to([c.entity_id for c in topic_candidates])
    else:
        pool = set(store.dataset_ids())

    ordered = sorted(_apply_hard_filters(store, intent, sorted(pool)))
    if not ordered:
        return []

    n = len(ordered)
    index_of = {did: i for i, did in enumerate(ordered)}
    scores: dict[str, np.ndarray] = {}
    evidence: dict[str, list[str | None]] = {}
    details: dict[str, list[dict]] = {}

    for dimension in TEXT_DIMENSIONS:
        column = np.zeros(n, dtype=np.float64)
        matched: list[str | None] = [None] * n
        # Best candidate first; the first hit per dataset is its maximum.
        for c in sorted(
            by_dimension.get(dimension, []), key=lambda c: (-c.cosine, c.entity_id)
        ):
            for did in store.datasets_linked_to([c.entity_id]):
                i = index_of.get(did)
                if i is not None and matched[i] is None:
                    column[i] = c.cosine
                    matched[i] = c.entity_id
        scores[dimension] = column
        evidence[dimension] = matched

    if intent.space is not None:
        f1, precision, recall, entities = _spatial_scores(store, intent, ordered)
        scores["space"] = f1
        evidence["space"] = entities
        details["space"] = [
            {"precision": float(p), "recall": float(r)}
            for p, r in zip(precision, recall)
        ]
    else:
        scores["space"] = np.zeros(n, dtype=np.float64)
        evidence["space"] = [None] * n

    if intent.time is not None:
        f1, precision, recall, entities = _temporal_scores(store, intent, ordered)
        scores["time"] = f1
        evidence["time"] = entities
        details["time"] = [
            {"precision": float(p), "recall": float(r)}
            for p, r in zip(precision, recall)
        ]
    else:
        scores["time"] = np.zeros(n, dtype=np.float64)
        evidence["time"] = [None] * n

    weights = cfg.weights
    raw = np.zeros(n, dtype=np.float64)
    for dimension in DIMENSIONS:
        raw += weights.for_dimension(dimension) * scores[dimension]

    max_raw = float(raw.max())
    normalized = raw / max_raw if max_raw > 0.0 else np.zeros(n, dtype=np.float64)

    order = sorted(range(n), key=lambda i: (-normalized[i], ordered[i]))
    top = order[: cfg.retrieval_size]

    results: list[ScoredDataset] = []
    for rank, i in enumerate(top, start=1):
        did = ordered[i]
        contributions = {}
        for dimension in DIMENSIONS:
            detail = details.get(dimension, [])
            contributions[dimension] = RelevanceScore(
                dimension=dimension,
                score=float(scores[dimension][i]),
                weight=weights.for_dimension(dimension),
                entity_id=evidence[dimension][i],
                detail=detail[i] if detail else {},
            )
        entity = store.entities[did]
        results.append(
            ScoredDataset(
                dataset_id=did,
                title=entity.label,
                source_id=store.dataset_source(did),
                raw=float(raw[i]),
                normalized=float(normalized[i]),
                rank=rank,
                contributions=contributions,
            )
        )
    return results

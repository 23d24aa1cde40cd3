"""Query indexes over the graph: vector, spatial, temporal.

All three are exact-scan array structures: results are defined by brute
force over per-kind arrays, with deterministic tie-breaks, so anything
faster must match them bit-for-bit. Spatial rows are bbox parts (wrap boxes
contribute two rows) and every per-dataset measure sums over parts.
"""
from __future__ import annotations

from datetime import datetime, timezone
from typing import TYPE_CHECKING

import numpy as np

from ..errors import DimensionMismatch, UnknownKind
from ..geometry import BBox, TimeInterval
from ..ontology import EMBEDDABLE_KINDS, EntityKind, RelationshipKind

if TYPE_CHECKING:
    from .store import GraphStore

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def _seconds(instant: datetime) -> float:
    return (instant - _EPOCH).total_seconds()


class VectorIndex:
    def __init__(self, kind: EntityKind, ids: list[str], matrix: np.ndarray):
        self.kind = kind
        self.ids = ids
        self._matrix = matrix  # (n, D) float64

    def __len__(self) -> int:
        return len(self.ids)

    def search(self, query: np.ndarray, threshold: float, k: int) -> list[tuple[str, float]]:
        if len(self.ids) == 0:
            return []
        if query.shape != (self._matrix.shape[1],):
            raise DimensionMismatch(
                f"query dimension {query.shape} vs index {self._matrix.shape[1]}")
        scores = self._matrix @ np.asarray(query, dtype=np.float64)
        rows = np.flatnonzero(scores >= threshold)
        ranked = sorted(rows, key=lambda r: (-scores[r], self.ids[r]))[:k]
        return [(self.ids[r], float(scores[r])) for r in ranked]


class SpatialEntityIndex:
    """Part-expanded arrays over Space entities."""

    def __init__(self, ids: list[str], boxes: list[BBox]):
        self.ids = ids
        self.row_of = {sid: i for i, sid in enumerate(ids)}
        part_rows: list[int] = []
        bounds: list[tuple[float, float, float, float]] = []
        areas = np.zeros(len(ids), dtype=np.float64)
        for i, box in enumerate(boxes):
            for part in box.parts():
                part_rows.append(i)
                bounds.append((part.west, part.south, part.east, part.north))
                areas[i] += (part.east - part.west) * (part.north - part.south)
        self._part_row = np.asarray(part_rows, dtype=np.intp)
        if bounds:
            arr = np.asarray(bounds, dtype=np.float64)
            self._pw, self._ps, self._pe, self._pn = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
        else:
            self._pw = self._ps = self._pe = self._pn = np.zeros(0, dtype=np.float64)
        self.area = areas

    def __len__(self) -> int:
        return len(self.ids)

    def overlap_area(self, query: BBox) -> np.ndarray:
        """Exact overlap area with the query, one value per Space entity."""
        acc = np.zeros(len(self.ids), dtype=np.float64)
        for part in query.parts():
            ow = np.minimum(self._pe, part.east) - np.maximum(self._pw, part.west)
            oh = np.minimum(self._pn, part.north) - np.maximum(self._ps, part.south)
            piece = np.clip(ow, 0.0, None) * np.clip(oh, 0.0, None)
            np.add.at(acc, self._part_row, piece)
        return acc

    def intersect_mask(self, query: BBox) -> np.ndarray:
        """Closed-semantics intersection (touching counts), per Space entity."""
        mask = np.zeros(len(self.ids), dtype=bool)
        for part in query.parts():
            hits = ((self._pw <= part.east) & (part.west <= self._pe)
                    & (self._ps <= part.north) & (part.south <= self._pn))
            mask[self._part_row[hits]] = True
        return mask


class TemporalEntityIndex:
    """Second-resolution arrays over Time entities, open ends clamped."""

    def __init__(self, ids: list[str], intervals: list[TimeInterval], clamp: datetime):
        self.ids = ids
        self.row_of = {tid: i for i, tid in enumerate(ids)}
        closed = [iv.closed(clamp) for iv in intervals]
        self.begin_s = np.asarray([_seconds(iv.begin) for iv in closed], dtype=np.float64)
        self.end_s = np.asarray([_seconds(iv.end) for iv in closed], dtype=np.float64)
        self.duration_s = self.end_s - self.begin_s

    def __len__(self) -> int:
        return len(self.ids)

    def overlap_seconds(self, query: TimeInterval, clamp: datetime) -> np.ndarray:
        q = query.closed(clamp)
        qb, qe = _seconds(q.begin), _seconds(q.end)
        return np.clip(np.minimum(self.end_s, qe) - np.maximum(self.begin_s, qb), 0.0, None)

    def intersect_mask(self, query: TimeInterval, clamp: datetime) -> np.ndarray:
        q = query.closed(clamp)
        qb, qe = _seconds(q.begin), _seconds(q.end)
        return (self.begin_s <= qe) & (qb <= self.end_s)


class IndexSet:
    def __init__(
        self,
        vectors: dict[EntityKind, VectorIndex],
        spatial: SpatialEntityIndex,
        temporal: TemporalEntityIndex,
        space_of: dict[str, str],
        time_of: dict[str, str],
        clamp: datetime,
    ):
        self.vectors = vectors
        self.spatial = spatial
        self.temporal = temporal
        self.space_of = space_of  # dataset id -> Space entity id
        self.time_of = time_of  # dataset id -> Time entity id
        self.clamp = clamp

    @classmethod
    def build(cls, store: GraphStore) -> IndexSet:
        vectors: dict[EntityKind, VectorIndex] = {}
        for kind in EMBEDDABLE_KINDS:
            entries = sorted(
                (e for e in store.entities_of_kind(kind) if e.embedding is not None),
                key=lambda e: e.id,
            )
            for entity in entries:
                if entity.embedding.shape != (store.dimension,):
                    raise DimensionMismatch(
                        f"{entity.id} embedding shape {entity.embedding.shape}, "
                        f"graph dimension {store.dimension}")
            matrix = (np.stack([e.embedding for e in entries]).astype(np.float64)
                      if entries else np.zeros((0, store.dimension), dtype=np.float64))
            vectors[kind] = VectorIndex(kind, [e.id for e in entries], matrix)

        spaces = sorted(store.entities_of_kind(EntityKind.SPACE), key=lambda e: e.id)
        spatial = SpatialEntityIndex([e.id for e in spaces], [e.bbox for e in spaces])
        times = sorted(store.entities_of_kind(EntityKind.TIME), key=lambda e: e.id)
        temporal = TemporalEntityIndex(
            [e.id for e in times], [e.interval for e in times], store.build_timestamp)

        space_of: dict[str, str] = {}
        time_of: dict[str, str] = {}
        for did in store.dataset_ids():
            for rel in store.out_edges(did, RelationshipKind.HAS_SPACE):
                space_of[did] = rel.to_id
                break
            for rel in store.out_edges(did, RelationshipKind.HAS_TIME):
                time_of[did] = rel.to_id
                break
        return cls(vectors, spatial, temporal, space_of, time_of, store.build_timestamp)

    def manifest(self) -> dict:
        return {
            "vector": {kind.value: len(idx) for kind, idx in self.vectors.items()},
            "spatial": len(self.spatial),
            "temporal": len(self.temporal),
        }

    def vector_search(self, kind: EntityKind, query: np.ndarray,
                      threshold: float, k: int) -> list[tuple[str, float]]:
        index = self.vectors.get(kind)
        if index is None:
            raise UnknownKind(f"no vector index for kind {kind!r}")
        return index.search(query, threshold, k)

"""Array indexes: brute-force equivalence, clamping, wrap handling."""

from __future__ import annotations

from datetime import datetime, timezone

import numpy as np
import pytest

from geodiscover.errors import DimensionMismatch, UnknownKind
from geodiscover.geometry import (
    BBox,
    TimeInterval,
    bbox_overlap_area,
    intersects,
)
from geodiscover.graph.indexes import (
    IndexSet,
    SpatialEntityIndex,
    TemporalEntityIndex,
    VectorIndex,
)
from geodiscover.ontology import EntityKind

CLAMP = datetime(2025, 11, 8, 12, 0, 0, tzinfo=timezone.utc)


def utc(*args: int) -> datetime:
    return datetime(*args, tzinfo=timezone.utc)


def test_vector_index_threshold_sort_and_k():
    matrix = np.asarray([
        [1.0, 0.0],
        [0.0, 1.0],
        [1.0, 0.0],
    ], dtype=np.float64)
    index = VectorIndex(EntityKind.TOPIC, ["t:b", "t:c", "t:a"], matrix)

    hits = index.search(np.asarray([1.0, 0.0]), threshold=0.5, k=5)
    assert hits == [("t:a", 1.0), ("t:b", 1.0)]  # ties break by id

    assert index.search(np.asarray([1.0, 0.0]), threshold=0.5, k=1) == [("t:a", 1.0)]
    # Inclusive threshold keeps an exact-boundary score.
    boundary = index.search(np.asarray([0.0, 1.0]), threshold=1.0, k=5)
    assert boundary == [("t:c", 1.0)]

    with pytest.raises(DimensionMismatch):
        index.search(np.asarray([1.0, 0.0, 0.0]), threshold=0.0, k=1)


def test_vector_index_empty():
    index = VectorIndex(EntityKind.TOPIC, [], np.zeros((0, 4)))
    assert index.search(np.zeros(4), threshold=0.0, k=3) == []


BOXES = [
    BBox(-125.0, 24.0, -66.0, 50.0),
    BBox(-87.63, 24.52, -80.03, 31.0),
    BBox(170.0, -10.0, -170.0, 10.0),     # wraps the antimeridian
    BBox(5.0, 5.0, 5.0, 5.0),             # degenerate point
]


def test_spatial_index_matches_scalar_overlap():
    index = SpatialEntityIndex([f"space:{i}" for i in range(len(BOXES))], BOXES)
    for query in (BBox(-124.7844, 24.3963, -66.9514, 49.3844),
                  BBox(160.0, -20.0, -160.0, 20.0),
                  BBox(0.0, 0.0, 10.0, 10.0)):
        got = index.overlap_area(query)
        want = [bbox_overlap_area(box, query) for box in BOXES]
        np.testing.assert_allclose(got, want, atol=1e-9)

        mask = index.intersect_mask(query)
        assert mask.tolist() == [intersects(box, query) for box in BOXES]


def test_spatial_index_areas_sum_parts():
    index = SpatialEntityIndex(["space:wrap"], [BBox(170.0, 0.0, -170.0, 10.0)])
    assert index.area[0] == pytest.approx(200.0)
    assert len(index) == 1


def test_temporal_index_clamps_open_ends():
    intervals = [
        TimeInterval(utc(1981, 1, 1), None),
        TimeInterval(utc(2000, 1, 1), utc(2010, 1, 1)),
    ]
    index = TemporalEntityIndex(["time:a", "time:b"], intervals, CLAMP)
    assert index.duration_s[0] == pytest.approx(
        (CLAMP - utc(1981, 1, 1)).total_seconds())

    query = TimeInterval(utc(1990, 1, 1), utc(2020, 12, 31, 23, 59, 59))
    overlap = index.overlap_seconds(query, CLAMP)
    assert overlap[0] == pytest.approx((utc(2020, 12, 31, 23, 59, 59)
                                        - utc(1990, 1, 1)).total_seconds())
    assert overlap[1] == pytest.approx((utc(2010, 1, 1)
                                        - utc(2000, 1, 1)).total_seconds())

    # A query opening past every clamped end matches nothing.
    future = TimeInterval(utc(2030, 1, 1), None)
    assert index.intersect_mask(future, CLAMP).tolist() == [False, False]


def test_temporal_mask_uses_closed_endpoints():
    index = TemporalEntityIndex(
        ["time:a"], [TimeInterval(utc(2000, 1, 1), utc(2005, 1, 1))], CLAMP)
    touching = TimeInterval(utc(2005, 1, 1), utc(2010, 1, 1))
    assert index.intersect_mask(touching, CLAMP).tolist() == [True]


def test_index_set_over_mini_store(mini_store):
    indexes = mini_store.ensure_indexes()
    manifest = indexes.manifest()
    assert set(manifest["vector"]) == {"Topic", "Keyword", "Organization",
                                       "Format", "License"}
    # Every dataset with a Space edge appears in the lookup and the index.
    assert len(indexes.space_of) <= len(mini_store.dataset_ids())
    for did, sid in indexes.space_of.items():
        assert sid in indexes.spatial.row_of
        assert mini_store.dataset_space(did) is not None
    for did, tid in indexes.time_of.items():
        assert tid in indexes.temporal.row_of

    with pytest.raises(UnknownKind):
        indexes.vector_search(EntityKind.DATASET, np.zeros(256), 0.0, 1)


def test_index_set_rejects_misdimensioned_embeddings():
    from geodiscover.graph.store import GraphStore
    from geodiscover.ontology import Entity

    store = GraphStore(dimension=4)
    bad = np.zeros(8, dtype=np.float32)
    bad[0] = 1.0
    store.add_entity(Entity(id="topic:t", kind=EntityKind.TOPIC, label="t",
                            embedding=bad))
    with pytest.raises(DimensionMismatch):
        IndexSet.build(store)

"""Entity matching, hard filters, and weighted relevance scoring."""

from __future__ import annotations

from datetime import datetime, timezone

import pytest

from conftest import BUILD_TS
from geodiscover.errors import ProviderFailure
from geodiscover.geometry import BBox, TimeInterval, spatial_f1, temporal_f1
from geodiscover.graph.build import embed_attribute_entities
from geodiscover.graph.store import GraphStore
from geodiscover.ontology import Entity, EntityKind, RelationshipKind
from geodiscover.pipeline.config import PipelineConfig
from geodiscover.pipeline.intent import GeoIntent, SpaceConstraint, TimeConstraint
from geodiscover.pipeline.retrieval import (
    CandidateEntity,
    apply_selection,
    match_entities,
    retrieve_and_score,
    validate_candidates,
)
from geodiscover.providers.embedding import HashingEmbedder
from geodiscover.providers.llm import ScriptedLlm
from geodiscover.records import LicenseRef, NormalizedRecord, OrgRef, ResourceRef

CFG = PipelineConfig()
CONUS = BBox(-124.7844, 24.3963, -66.9514, 49.3844)
FLORIDA = BBox(-87.6, 24.5, -80.0, 31.0)
QUERY_TIME = TimeInterval(
    datetime(1990, 1, 1, tzinfo=timezone.utc),
    datetime(2020, 12, 31, 23, 59, 59, tzinfo=timezone.utc),
)


def _record(native_id: str, title: str, **kwargs) -> NormalizedRecord:
    return NormalizedRecord(
        source_id="lab", native_id=native_id, title=title, standard="stac", **kwargs
    )


def small_store() -> GraphStore:
    """Four datasets with hand-picked keywords, footprints, and spans."""
    store = GraphStore(dimension=256, build_timestamp=BUILD_TS)
    store.ingest_record(_record(
        "alpha", "Alpha",
        organization=OrgRef(title="NOAA"),
        keywords=("temperature",),
        license=LicenseRef(title="Public Domain"),
        space=BBox(-125.0, 24.0, -66.0, 50.0),
        time=TimeInterval(datetime(1981, 1, 1, tzinfo=timezone.utc), None),
        resources=(ResourceRef(url="https://x.test/a.nc", format="NetCDF"),),
    ))
    store.ingest_record(_record(
        "beta", "Beta",
        keywords=("temperature",),
        space=FLORIDA,
        time=TimeInterval(
            datetime(2000, 1, 1, tzinfo=timezone.utc),
            datetime(2010, 1, 1, tzinfo=timezone.utc),
        ),
    ))
    store.ingest_record(_record("gamma", "Gamma", keywords=("humidity",)))
    store.ingest_record(_record(
        "delta", "Delta",
        keywords=("temperature",),
        space=BBox(0.0, 40.0, 20.0, 55.0),
        time=TimeInterval(
            datetime(1800, 1, 1, tzinfo=timezone.utc),
            datetime(1850, 1, 1, tzinfo=timezone.utc),
        ),
    ))
    embedder = HashingEmbedder(256)
    topic = Entity(
        id="topic:daily temperature",
        kind=EntityKind.TOPIC,
        label="daily temperature",
        embedding=embedder.embed("daily temperature"),
    )
    store.add_entity(topic)
    store.add_relationship(RelationshipKind.HAS_TOPIC, "dataset:lab::alpha", topic.id)
    embed_attribute_entities(store, embedder)
    store.build_indexes()
    return store


def topic_intent(text: str = "temperature") -> GeoIntent:
    return GeoIntent(texts={"topic": text}, topic=text)


def full_intent() -> GeoIntent:
    texts = {
        "topic": "temperature",
        "space": "CONUS",
        "time": "from 1990 to 2020",
        "organization": "NOAA",
        "format": "NetCDF",
        "license": "Public Domain",
    }
    return GeoIntent(
        texts=texts,
        topic="temperature",
        space=SpaceConstraint("CONUS", CONUS),
        time=TimeConstraint("from 1990 to 2020", QUERY_TIME),
        organization="NOAA",
        format="NetCDF",
        license="Public Domain",
    )


def test_match_entities_covers_topic_and_keyword_kinds():
    store = small_store()
    matches = match_entities(store, HashingEmbedder(256), CFG, topic_intent())
    by_id = {c.entity_id: c for c in matches}
    assert by_id["keyword:temperature"].cosine == pytest.approx(1.0)
    assert by_id["keyword:temperature"].kind is EntityKind.KEYWORD
    assert by_id["keyword:temperature"].dimension == "topic"
    # "daily temperature" shares one of its two tokens with the query
    assert by_id["topic:daily temperature"].cosine == pytest.approx(2 ** -0.5)
    assert "keyword:humidity" not in by_id
    assert all(c.validated for c in matches)


def test_match_entities_per_dimension_kinds():
    store = small_store()
    intent = GeoIntent(
        texts={"organization": "NOAA", "format": "NetCDF"},
        organization="NOAA",
        format="NetCDF",
    )
    matches = match_entities(store, HashingEmbedder(256), CFG, intent)
    dims = {(c.dimension, c.entity_id) for c in matches}
    assert ("organization", "org:noaa") in dims
    assert ("format", "format:netcdf") in dims
    assert all(c.dimension in ("organization", "format") for c in matches)


def test_validate_candidates_marks_kept_entities():
    candidates = [
        CandidateEntity("keyword:temperature", EntityKind.KEYWORD, "topic",
                        "temperature", 1.0),
        CandidateEntity("keyword:sst", EntityKind.KEYWORD, "topic",
                        "sst", 0.8),
    ]
    llm = ScriptedLlm([
        {
            "task": "EntityValidation",
            "match": {},
            "output": {"keep": ["keyword:temperature"]},
        }
    ])
    out = validate_candidates(llm, topic_intent(), candidates)
    assert [c.validated for c in out] == [True, False]
    # candidate order and payload are preserved
    assert [c.entity_id for c in out] == [c.entity_id for c in candidates]


def test_validate_candidates_keeps_all_when_model_unavailable():
    candidates = [
        CandidateEntity("keyword:temperature", EntityKind.KEYWORD, "topic",
                        "temperature", 1.0),
    ]
    out = validate_candidates(ScriptedLlm(), topic_intent(), candidates)
    assert [c.validated for c in out] == [True]

    class Outage:
        def complete(self, task):
            raise ProviderFailure("llm offline")

    out = validate_candidates(Outage(), topic_intent(), candidates)
    assert [c.validated for c in out] == [True]
    assert validate_candidates(ScriptedLlm(), topic_intent(), []) == []


def test_apply_selection():
    candidates = [
        CandidateEntity("keyword:temperature", EntityKind.KEYWORD, "topic",
                        "temperature", 1.0),
        CandidateEntity("keyword:sst", EntityKind.KEYWORD, "topic", "sst", 0.8),
    ]
    out = apply_selection(candidates, ["keyword:sst"])
    assert [c.validated for c in out] == [False, True]
    with pytest.raises(ValueError, match="unknown candidate ids"):
        apply_selection(candidates, ["keyword:nope"])


def test_topic_intent_without_validated_topic_candidates_is_empty():
    store = small_store()
    candidates = match_entities(store, HashingEmbedder(256), CFG, topic_intent())
    none_kept = apply_selection(candidates, [])
    assert retrieve_and_score(store, CFG, topic_intent(), none_kept) == []
    assert retrieve_and_score(store, CFG, topic_intent(), []) == []


def test_browse_pool_when_no_topic_stated():
    store = small_store()
    intent = GeoIntent(texts={"format": "NetCDF"}, format="NetCDF")
    candidates = match_entities(store, HashingEmbedder(256), CFG, intent)
    ranked = retrieve_and_score(store, CFG, intent, candidates)
    # every dataset is pooled; only alpha has the format edge
    assert len(ranked) == 4
    assert ranked[0].dataset_id == "dataset:lab::alpha"
    assert ranked[0].contributions["format"].score == pytest.approx(1.0)
    assert ranked[0].raw == pytest.approx(0.1)
    assert all(r.raw == pytest.approx(0.0) for r in ranked[1:])


def test_hard_filters_drop_missing_and_disjoint_dimensions():
    store = small_store()
    embedder = HashingEmbedder(256)

    spatial = GeoIntent(
        texts={"topic": "temperature", "space": "CONUS"},
        topic="temperature",
        space=SpaceConstraint("CONUS", CONUS),
    )
    ranked = retrieve_and_score(
        store, CFG, spatial, match_entities(store, embedder, CFG, spatial)
    )
    # gamma has no footprint, delta's is disjoint from the query box
    assert [r.dataset_id for r in ranked] == [
        "dataset:lab::alpha", "dataset:lab::beta",
    ]

    temporal = GeoIntent(
        texts={"topic": "temperature", "time": "from 1990 to 2020"},
        topic="temperature",
        time=TimeConstraint("from 1990 to 2020", QUERY_TIME),
    )
    ranked = retrieve_and_score(
        store, CFG, temporal, match_entities(store, embedder, CFG, temporal)
    )
    assert [r.dataset_id for r in ranked] == [
        "dataset:lab::alpha", "dataset:lab::beta",
    ]


def test_source_filter():
    store = small_store()
    embedder = HashingEmbedder(256)
    intent = GeoIntent(
        texts={"topic": "temperature"}, topic="temperature", sources=("lab",)
    )
    ranked = retrieve_and_score(
        store, CFG, intent, match_entities(store, embedder, CFG, intent)
    )
    assert len(ranked) == 3

    other = GeoIntent(
        texts={"topic": "temperature"}, topic="temperature", sources=("elsewhere",)
    )
    assert retrieve_and_score(
        store, CFG, other, match_entities(store, embedder, CFG, other)
    ) == []


def test_weighted_sum_matches_hand_arithmetic():
    store = small_store()
    intent = full_intent()
    ranked = retrieve_and_score(
        store, CFG, intent, match_entities(store, HashingEmbedder(256), CFG, intent)
    )
    assert [r.dataset_id for r in ranked] == [
        "dataset:lab::alpha", "dataset:lab::beta",
    ]

    alpha, beta = ranked
    c = alpha.contributions
    # coverage dimensions reproduce the scalar F1 path exactly
    sp_a = spatial_f1(store.dataset_space(alpha.dataset_id), CONUS)
    t_a = temporal_f1(store.dataset_time(alpha.dataset_id), QUERY_TIME, clamp=BUILD_TS)
    assert c["space"].score == pytest.approx(sp_a.f1, abs=1e-12)
    assert c["time"].score == pytest.approx(t_a.f1, abs=1e-12)
    # text dimensions carry the candidate cosines (unit up to float32)
    for dimension in ("topic", "organization", "format", "license"):
        assert c[dimension].score == pytest.approx(1.0, abs=1e-6)
    expected_a = sum(
        CFG.weights.for_dimension(d) * c[d].score
        for d in ("topic", "space", "time", "organization", "format", "license")
    )
    assert alpha.raw == pytest.approx(expected_a, abs=1e-12)
    assert alpha.normalized == pytest.approx(1.0, abs=1e-12)
    assert alpha.rank == 1

    sp_b = spatial_f1(FLORIDA, CONUS)
    t_b = temporal_f1(store.dataset_time(beta.dataset_id), QUERY_TIME, clamp=BUILD_TS)
    expected_b = (0.3 * beta.contributions["topic"].score
                  + 0.2 * sp_b.f1 + 0.2 * t_b.f1)
    assert beta.raw == pytest.approx(expected_b, abs=1e-12)
    assert beta.normalized == pytest.approx(beta.raw / alpha.raw, abs=1e-12)
    assert beta.rank == 2

    # evidence: which entity carried each dimension, plus coverage detail
    assert c["topic"].entity_id == "keyword:temperature"
    assert c["organization"].entity_id == "org:noaa"
    assert c["format"].entity_id == "format:netcdf"
    assert c["license"].entity_id == "license:public domain"
    assert c["space"].detail["precision"] == pytest.approx(sp_a.precision, abs=1e-12)
    assert c["space"].detail["recall"] == pytest.approx(sp_a.recall, abs=1e-12)
    assert c["time"].detail["precision"] == pytest.approx(t_a.precision, abs=1e-12)
    assert c["space"].weight == pytest.approx(0.2)
    assert c["space"].weighted == pytest.approx(0.2 * sp_a.f1, abs=1e-12)
    # beta states no organization, format, or license
    assert beta.contributions["organization"].score == 0.0
    assert beta.contributions["organization"].entity_id is None


def test_absent_dimensions_contribute_zero_without_reweighting():
    store = small_store()
    intent = topic_intent()
    ranked = retrieve_and_score(
        store, CFG, intent, match_entities(store, HashingEmbedder(256), CFG, intent)
    )
    by_id = {r.dataset_id: r for r in ranked}
    alpha = by_id["dataset:lab::alpha"]
    # keyword match 1.0 on a 0.3 weight; no redistribution to other dims
    assert alpha.raw == pytest.approx(0.3, abs=1e-12)
    assert alpha.contributions["space"].score == 0.0
    assert alpha.contributions["time"].score == 0.0


def test_best_candidate_wins_per_dataset():
    store = small_store()
    intent = topic_intent("daily temperature")
    ranked = retrieve_and_score(
        store, CFG, intent, match_entities(store, HashingEmbedder(256), CFG, intent)
    )
    by_id = {r.dataset_id: r for r in ranked}
    # alpha carries both the exact topic (1.0) and the keyword (~0.707)
    alpha = by_id["dataset:lab::alpha"]
    assert alpha.contributions["topic"].entity_id == "topic:daily temperature"
    assert alpha.contributions["topic"].score == pytest.approx(1.0)
    beta = by_id["dataset:lab::beta"]
    assert beta.contributions["topic"].entity_id == "keyword:temperature"
    assert beta.contributions["topic"].score == pytest.approx(2 ** -0.5)


def test_ties_break_by_dataset_id_and_top_k_truncates():
    store = GraphStore(dimension=256, build_timestamp=BUILD_TS)
    for native_id in ("zeta", "yankee", "xray", "alpha"):
        store.ingest_record(_record(native_id, native_id.title(),
                                    keywords=("temperature",)))
    embed_attribute_entities(store, HashingEmbedder(256))
    store.build_indexes()

    intent = topic_intent()
    candidates = match_entities(store, HashingEmbedder(256), CFG, intent)
    ranked = retrieve_and_score(store, CFG, intent, candidates)
    assert [r.dataset_id for r in ranked] == [
        "dataset:lab::alpha",
        "dataset:lab::xray",
        "dataset:lab::yankee",
        "dataset:lab::zeta",
    ]
    assert [r.rank for r in ranked] == [1, 2, 3, 4]
    assert all(r.normalized == pytest.approx(1.0) for r in ranked)

    small = CFG.with_overrides({"retrieval_size": 2, "answer_size": 2})
    assert len(retrieve_and_score(store, small, intent, candidates)) == 2


def test_mini_store_climate_query_shape(mini_store, embedder):
    intent = GeoIntent(
        texts={"topic": "daily temperature", "space": "CONUS",
               "time": "from 1990 to 2020"},
        topic="daily temperature",
        space=SpaceConstraint("CONUS", CONUS),
        time=TimeConstraint("from 1990 to 2020", QUERY_TIME),
    )
    candidates = match_entities(mini_store, embedder, CFG, intent)
    ranked = retrieve_and_score(mini_store, CFG, intent, candidates)
    assert len(ranked) == CFG.retrieval_size
    assert ranked[0].normalized == pytest.approx(1.0, abs=1e-12)
    scores = [r.normalized for r in ranked]
    assert scores == sorted(scores, reverse=True)
    assert [r.rank for r in ranked] == list(range(1, 21))

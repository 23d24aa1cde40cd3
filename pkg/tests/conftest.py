"""Shared fixtures: the small replayed catalog and scripted providers."""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import pytest

from geodiscover.graph.build import (
    deduplicate_topics,
    embed_attribute_entities,
    enrich_spacetime,
    generate_topics,
)
from geodiscover.graph.store import GraphStore
from geodiscover.harvest import harvest_catalog, load_sources
from geodiscover.pipeline.config import PipelineConfig
from geodiscover.pipeline.orchestrator import PipelineEnv
from geodiscover.providers.embedding import HashingEmbedder
from geodiscover.providers.geocoding import Gazetteer
from geodiscover.providers.llm import ScriptedLlm

FIXTURES = Path(__file__).resolve().parent / "fixtures"

# Pinned so Space/Time clamping and snapshots are reproducible across runs.
BUILD_TS = datetime(2025, 11, 8, 12, 0, 0, tzinfo=timezone.utc)

DIMENSION = 256

CLIMATE_QUERY = (
    "I'm looking for daily temperature datasets for CONUS from 1990 to 2020."
)


def fixture_path(*parts: str) -> Path:
    return FIXTURES.joinpath(*parts)


def load_fixture_json(*parts: str):
    return json.loads(fixture_path(*parts).read_text(encoding="utf-8"))


def harvest_fixture_records() -> list:
    """Replay every configured source and collect the parsed records."""
    records: list = []
    for cfg in load_sources(fixture_path("sources.yaml")):
        harvest_catalog(cfg, records.append,
                        replay_dir=fixture_path("replay", cfg.source_id))
    return records


def build_mini_store(dimension: int = DIMENSION) -> GraphStore:
    """Assemble the replayed catalog the same way the CLI pipeline does."""
    store = GraphStore(dimension=dimension, build_timestamp=BUILD_TS)
    for record in harvest_fixture_records():
        store.ingest_record(record)
    embedder = HashingEmbedder(dimension)
    llm = ScriptedLlm.from_json(fixture_path("scripts", "build.json"))
    generate_topics(store, store.dataset_ids(), llm, embedder)
    deduplicate_topics(store)
    embed_attribute_entities(store, embedder)
    store.check_integrity()
    enrich_spacetime(store, llm, Gazetteer.bundled())
    store.build_indexes()
    return store


@pytest.fixture(scope="session")
def mini_store() -> GraphStore:
    return build_mini_store()


@pytest.fixture(scope="session")
def embedder() -> HashingEmbedder:
    return HashingEmbedder(DIMENSION)


@pytest.fixture(scope="session")
def geocoder() -> Gazetteer:
    return Gazetteer.bundled()


@pytest.fixture()
def walkthrough_llm() -> ScriptedLlm:
    return ScriptedLlm.from_json(fixture_path("scripts", "walkthrough.json"))


@pytest.fixture()
def walkthrough_env(mini_store, walkthrough_llm, embedder, geocoder) -> PipelineEnv:
    return PipelineEnv(store=mini_store, llm=walkthrough_llm,
                       embedder=embedder, geocoder=geocoder)


@pytest.fixture()
def walkthrough_cfg() -> PipelineConfig:
    # The scripted conversation was tuned for a stricter gate than the default.
    return PipelineConfig().with_overrides({"confidence_threshold": 0.7})

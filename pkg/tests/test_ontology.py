"""Graph vocabulary: entity constraints, edge signatures, label merging."""

from __future__ import annotations

from datetime import datetime, timezone

import numpy as np
import pytest

from geodiscover.geometry import BBox, TimeInterval
from geodiscover.ontology import (
    EMBEDDABLE_KINDS,
    RELATIONSHIP_SIGNATURES,
    Entity,
    EntityKind,
    Relationship,
    RelationshipKind,
    Subgraph,
    canonical_label,
    check_signature,
)


def test_vocabulary_is_complete():
    assert {k.value for k in EntityKind} == {
        "Dataset", "Topic", "Keyword", "Space", "Time",
        "Organization", "Source", "Resource", "Format", "License",
    }
    assert len(RelationshipKind) == 9
    assert set(RELATIONSHIP_SIGNATURES) == set(RelationshipKind)


def test_space_and_time_payload_constraints():
    box = BBox(0.0, 0.0, 10.0, 10.0)
    space = Entity(id="space:x", kind=EntityKind.SPACE, label="x", bbox=box)
    assert space.bbox == box

    with pytest.raises(ValueError):
        Entity(id="space:x", kind=EntityKind.SPACE, label="x")  # bbox required
    with pytest.raises(ValueError):
        Entity(id="topic:t", kind=EntityKind.TOPIC, label="t", bbox=box)

    interval = TimeInterval(datetime(2020, 1, 1, tzinfo=timezone.utc), None)
    Entity(id="time:y", kind=EntityKind.TIME, label="y", interval=interval)
    with pytest.raises(ValueError):
        Entity(id="time:y", kind=EntityKind.TIME, label="y")
    with pytest.raises(ValueError):
        Entity(id="dataset:d", kind=EntityKind.DATASET, label="d", interval=interval)


def test_embedding_must_be_unit_norm():
    unit = np.zeros(8, dtype=np.float32)
    unit[0] = 1.0
    Entity(id="topic:t", kind=EntityKind.TOPIC, label="t", embedding=unit)
    with pytest.raises(ValueError):
        Entity(id="topic:t", kind=EntityKind.TOPIC, label="t", embedding=unit * 2.0)
    with pytest.raises(ValueError):
        Entity(id="topic:t", kind=EntityKind.TOPIC, label="t",
               embedding=np.zeros(8, dtype=np.float32))


def test_format_edges_allow_both_owners():
    assert check_signature(RelationshipKind.HAS_FORMAT,
                           EntityKind.RESOURCE, EntityKind.FORMAT)
    assert check_signature(RelationshipKind.HAS_FORMAT,
                           EntityKind.DATASET, EntityKind.FORMAT)
    assert not check_signature(RelationshipKind.HAS_FORMAT,
                               EntityKind.FORMAT, EntityKind.DATASET)


def test_signatures_reject_reversed_edges():
    assert check_signature(RelationshipKind.PROVIDES,
                           EntityKind.SOURCE, EntityKind.DATASET)
    assert not check_signature(RelationshipKind.PROVIDES,
                               EntityKind.DATASET, EntityKind.SOURCE)
    assert not check_signature(RelationshipKind.HAS_TOPIC,
                               EntityKind.TOPIC, EntityKind.DATASET)


def test_embeddable_kinds_are_attributes_only():
    assert set(EMBEDDABLE_KINDS) == {
        EntityKind.TOPIC, EntityKind.KEYWORD, EntityKind.ORGANIZATION,
        EntityKind.FORMAT, EntityKind.LICENSE,
    }
    assert EntityKind.DATASET not in EMBEDDABLE_KINDS


def test_subgraph_closure():
    dataset = Entity(id="dataset:a::1", kind=EntityKind.DATASET, label="d")
    topic = Entity(id="topic:t", kind=EntityKind.TOPIC, label="t")
    edge = Relationship(RelationshipKind.HAS_TOPIC, dataset.id, topic.id)

    closed = Subgraph(focus=dataset.id, entities=[dataset, topic],
                      relationships=[edge])
    assert closed.is_closed()
    assert closed.entity_ids() == {dataset.id, topic.id}

    dangling = Subgraph(focus=dataset.id, entities=[dataset],
                        relationships=[edge])
    assert not dangling.is_closed()


def test_canonical_label_folds_case_and_whitespace():
    assert canonical_label("  Daily   Temperature ") == "daily temperature"
    assert canonical_label("STRASSE") == canonical_label("strasse")
    assert canonical_label("Straße") == "strasse"  # casefold, not lower

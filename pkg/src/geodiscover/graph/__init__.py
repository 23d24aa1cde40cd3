"""Embedded metadata graph: store, build pipeline, indexes, persistence."""

from .store import GraphStore, dataset_entity_id
from .snapshot import load_snapshot, save_snapshot

__all__ = ["GraphStore", "dataset_entity_id", "load_snapshot", "save_snapshot"]

"""Versioned, checksummed graph persistence.

Line-delimited JSON: a header line, one line per entity, one per
relationship, one per dataset provenance map, then a trailing checksum line
whose sha256 covers every preceding byte. Embeddings travel as base64 of
little-endian 32-bit floats, so round-trips are bit-exact.
"""
from __future__ import annotations

import base64
import hashlib
import json
from datetime import datetime
from pathlib import Path

import numpy as np

from ..errors import CorruptSnapshot, IoFailure, SchemaVersionMismatch
from ..geometry import BBox, TimeInterval
from ..ontology import Entity, EntityKind, RelationshipKind
from .store import SCHEMA_VERSION, GraphStore


def _dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _encode_embedding(vec: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(vec, dtype="<f4").tobytes()).decode("ascii")


def _decode_embedding(text: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text), dtype="<f4").copy()


def _entity_line(entity: Entity) -> str:
    payload: dict = {"t": "e", "id": entity.id, "kind": entity.kind.value, "label": entity.label}
    if entity.description:
        payload["description"] = entity.description
    if entity.url:
        payload["url"] = entity.url
    if entity.bbox is not None:
        payload["bbox"] = entity.bbox.as_list()
    if entity.interval is not None:
        payload["interval"] = [
            entity.interval.begin.isoformat(),
            entity.interval.end.isoformat() if entity.interval.end else None,
        ]
    if entity.embedding is not None:
        payload["embedding"] = _encode_embedding(entity.embedding)
    if entity.source_native_id:
        payload["native"] = entity.source_native_id
    if entity.enriched:
        payload["enriched"] = True
    return _dumps(payload)


def _entity_from(payload: dict) -> Entity:
    interval = None
    if "interval" in payload:
        begin_text, end_text = payload["interval"]
        interval = TimeInterval(
            datetime.fromisoformat(begin_text),
            datetime.fromisoformat(end_text) if end_text else None,
        )
    return Entity(
        id=payload["id"],
        kind=EntityKind(payload["kind"]),
        label=payload["label"],
        description=payload.get("description"),
        url=payload.get("url"),
        bbox=BBox(*payload["bbox"]) if "bbox" in payload else None,
        interval=interval,
        embedding=_decode_embedding(payload["embedding"]) if "embedding" in payload else None,
        source_native_id=payload.get("native"),
        enriched=payload.get("enriched", False),
    )


def save_snapshot(store: GraphStore, path: str | Path) -> None:
    header = _dumps({
        "t": "header",
        "schema": SCHEMA_VERSION,
        "dimension": store.dimension,
        "build_timestamp": store.build_timestamp.isoformat(),
        "counts": {
            "entities": len(store.entities),
            "relationships": len(store.relationships),
            "provenance": len(store.provenance),
        },
        "indexes": store.indexes.manifest() if store.indexes is not None else None,
    })
    lines = [header]
    lines.extend(_entity_line(e) for e in store.entities.values())
    lines.extend(
        _dumps({"t": "r", "kind": r.kind.value, "from": r.from_id, "to": r.to_id})
        for r in store.relationships
    )
    lines.extend(
        _dumps({"t": "p", "dataset": did, "fields": fields})
        for did, fields in store.provenance.items()
    )
    body = "".join(line + "\n" for line in lines)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    body += _dumps({"t": "checksum", "sha256": digest}) + "\n"
    try:
        Path(path).write_text(body, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write snapshot {path}: {exc}") from exc


def load_snapshot(path: str | Path) -> GraphStore:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read snapshot {path}: {exc}") from exc
    lines = text.splitlines()
    if len(lines) < 2:
        raise CorruptSnapshot("snapshot too short to contain header and checksum")

    try:
        trailer = json.loads(lines[-1])
    except json.JSONDecodeError as exc:
        raise CorruptSnapshot(f"trailing line is not JSON: {exc}") from exc
    if trailer.get("t") != "checksum":
        raise CorruptSnapshot("snapshot does not end with a checksum line")
    body = "".join(line + "\n" for line in lines[:-1])
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if digest != trailer.get("sha256"):
        raise CorruptSnapshot("checksum mismatch; snapshot is corrupt or truncated")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorruptSnapshot(f"header is not JSON: {exc}") from exc
    if header.get("t") != "header":
        raise CorruptSnapshot("first line is not a snapshot header")
    if header.get("schema") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"snapshot schema {header.get('schema')!r}, supported {SCHEMA_VERSION!r}")

    store = GraphStore(
        dimension=int(header["dimension"]),
        build_timestamp=datetime.fromisoformat(header["build_timestamp"]),
    )
    for line in lines[1:-1]:
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptSnapshot(f"bad line in snapshot: {exc}") from exc
        tag = payload.get("t")
        if tag == "e":
            try:
                store.add_entity(_entity_from(payload))
            except (KeyError, ValueError) as exc:
                raise CorruptSnapshot(f"bad entity line: {exc}") from exc
        elif tag == "r":
            try:
                store.add_relationship(
                    RelationshipKind(payload["kind"]), payload["from"], payload["to"])
            except (KeyError, ValueError) as exc:
                raise CorruptSnapshot(f"bad relationship line: {exc}") from exc
        elif tag == "p":
            store.provenance[payload["dataset"]] = payload["fields"]
        else:
            raise CorruptSnapshot(f"unknown line tag {tag!r}")

    counts = header.get("counts", {})
    actual = {
        "entities": len(store.entities),
        "relationships": len(store.relationships),
        "provenance": len(store.provenance),
    }
    if counts != actual:
        raise CorruptSnapshot(f"header counts {counts} differ from contents {actual}")
    return store

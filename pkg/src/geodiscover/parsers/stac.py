"""STAC Collection parser.

Field mapping: id/title/description map directly, the self link becomes the
dataset URL, the first provider name becomes the organization, the license
string becomes the license title, extent.spatial.bbox[0] becomes the
bounding box ([west, south, east, north]; six-element boxes drop the
elevation pair), extent.temporal.interval[0] becomes the time span with a
null end meaning open-ended, and every non-self link becomes a resource
with the link rel as title and media type as format.
"""
from __future__ import annotations

import json
from datetime import datetime

from ..errors import MalformedDocument, MissingRequiredField
from ..geometry import BBox, TimeInterval
from ..records import LicenseRef, NormalizedRecord, OrgRef, ResourceRef
from .common import coerce_coordinate


def _parse_instant(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def _space(doc: dict, provenance: dict[str, str]) -> BBox | None:
    boxes = (doc.get("extent") or {}).get("spatial", {}).get("bbox") or []
    if not boxes or not isinstance(boxes[0], list):
        return None
    first = boxes[0]
    if len(first) == 6:
        first = [first[0], first[1], first[3], first[4]]
    if len(first) != 4:
        return None
    coords = [coerce_coordinate(v) for v in first]
    if any(c is None for c in coords):
        return None
    try:
        box = BBox(*coords)  # type: ignore[arg-type]
    except ValueError:
        return None
    provenance["extent.spatial.bbox[0]"] = json.dumps(boxes[0])
    return box


def _time(doc: dict, provenance: dict[str, str]) -> TimeInterval | None:
    intervals = (doc.get("extent") or {}).get("temporal", {}).get("interval") or []
    if not intervals or not isinstance(intervals[0], list) or len(intervals[0]) != 2:
        return None
    begin_text, end_text = intervals[0]
    if begin_text is None:
        # An interval with no declared start cannot be scored; leave time absent.
        return None
    try:
        begin = _parse_instant(begin_text)
        end = _parse_instant(end_text) if end_text is not None else None
    except ValueError:
        return None
    try:
        interval = TimeInterval(begin, end)
    except ValueError:
        return None
    provenance["extent.temporal.interval[0]"] = json.dumps(intervals[0])
    return interval


def parse_stac_collection(doc: str | dict, source_id: str) -> NormalizedRecord:
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("STAC collection must be a JSON object")

    native_id = doc.get("id")
    title = doc.get("title") or native_id
    if not native_id or not isinstance(native_id, str):
        raise MissingRequiredField("STAC collection has no id")
    if not title or not isinstance(title, str):
        raise MissingRequiredField(f"STAC collection {native_id!r} has no title")

    provenance: dict[str, str] = {"id": native_id, "title": title}
    description = doc.get("description") or ""
    if description:
        provenance["description"] = description

    url = None
    resources: list[ResourceRef] = []
    for link in doc.get("links") or []:
        if not isinstance(link, dict) or not link.get("href"):
            continue
        rel = link.get("rel") or ""
        if rel == "self":
            url = link["href"]
            provenance["links[rel=self].href"] = url
        else:
            resources.append(ResourceRef(
                url=link["href"],
                title=rel or link.get("title"),
                format=link.get("type"),
            ))
    if resources:
        provenance["links[rel!=self]"] = json.dumps(
            [[r.title, r.url] for r in resources])

    organization = None
    providers = [p for p in doc.get("providers") or [] if isinstance(p, dict) and p.get("name")]
    if providers:
        organization = OrgRef(title=providers[0]["name"])
        provenance["providers[0].name"] = providers[0]["name"]
        if len(providers) > 1:
            provenance["providers[1:].name"] = json.dumps([p["name"] for p in providers[1:]])

    keywords = tuple(k for k in doc.get("keywords") or [] if isinstance(k, str) and k.strip())
    if keywords:
        provenance["keywords"] = json.dumps(list(keywords))

    license_ref = None
    if isinstance(doc.get("license"), str) and doc["license"].strip():
        license_ref = LicenseRef(title=doc["license"])
        provenance["license"] = doc["license"]

    return NormalizedRecord(
        source_id=source_id,
        native_id=native_id,
        title=title,
        standard="stac",
        description=description,
        url=url,
        organization=organization,
        keywords=keywords,
        license=license_ref,
        space=_space(doc, provenance),
        time=_time(doc, provenance),
        resources=tuple(resources),
        raw_provenance=provenance,
    )

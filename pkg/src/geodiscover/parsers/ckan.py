"""CKAN package parser (package_show / package_search result shape).

Bounding boxes come from the bbox-west-long / bbox-south-lat /
bbox-east-long / bbox-north-lat extras, time spans from the
temporal-extent-begin / temporal-extent-end extras with year- and
month-granular values widened to the full covered span. Packages without
those extras simply lack space/time and become enrichment candidates.
"""
from __future__ import annotations

import json

from ..errors import MalformedDocument, MissingRequiredField
from ..geometry import BBox, TimeInterval
from ..providers.timetext import widen_begin, widen_end
from ..records import LicenseRef, NormalizedRecord, OrgRef, ResourceRef
from .common import coerce_coordinate

_BBOX_KEYS = ("bbox-west-long", "bbox-south-lat", "bbox-east-long", "bbox-north-lat")


def _extras(doc: dict) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in doc.get("extras") or []:
        if isinstance(item, dict) and "key" in item:
            out[item["key"]] = item.get("value", "")
    return out


def _space(extras: dict[str, str], provenance: dict[str, str]) -> BBox | None:
    values = [coerce_coordinate(extras.get(k)) for k in _BBOX_KEYS]
    if any(v is None for v in values):
        return None
    try:
        box = BBox(values[0], values[1], values[2], values[3])  # type: ignore[arg-type]
    except ValueError:
        return None
    for key in _BBOX_KEYS:
        provenance[f"extras[{key}]"] = extras[key]
    return box


def _time(extras: dict[str, str], provenance: dict[str, str]) -> TimeInterval | None:
    begin_text = (extras.get("temporal-extent-begin") or "").strip()
    end_text = (extras.get("temporal-extent-end") or "").strip()
    if not begin_text:
        return None
    try:
        begin = widen_begin(begin_text)
        end = widen_end(end_text) if end_text else None
        interval = TimeInterval(begin, end)
    except ValueError:
        return None
    provenance["extras[temporal-extent-begin]"] = begin_text
    if end_text:
        provenance["extras[temporal-extent-end]"] = end_text
    return interval


def parse_ckan_package(doc: str | dict, source_id: str) -> NormalizedRecord:
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("CKAN package must be a JSON object")

    native_id = doc.get("name") or doc.get("id")
    if not native_id or not isinstance(native_id, str):
        raise MissingRequiredField("CKAN package has no name or id")
    title = doc.get("title") or native_id
    if not isinstance(title, str) or not title.strip():
        raise MissingRequiredField(f"CKAN package {native_id!r} has no title")

    provenance: dict[str, str] = {"name": native_id, "title": title}
    description = doc.get("notes") or ""
    if description:
        provenance["notes"] = description

    organization = None
    org = doc.get("organization")
    if isinstance(org, dict) and org.get("title"):
        organization = OrgRef(
            title=org["title"],
            id=org.get("name") or org.get("id"),
            description=org.get("description") or "",
        )
        provenance["organization.title"] = org["title"]

    keywords = tuple(
        t["name"] for t in doc.get("tags") or []
        if isinstance(t, dict) and isinstance(t.get("name"), str) and t["name"].strip()
    )
    if keywords:
        provenance["tags[].name"] = json.dumps(list(keywords))

    license_ref = None
    license_title = doc.get("license_title") or doc.get("license_id")
    if isinstance(license_title, str) and license_title.strip():
        license_ref = LicenseRef(title=license_title, id=doc.get("license_id"))
        provenance["license_title"] = license_title

    resources: list[ResourceRef] = []
    for res in doc.get("resources") or []:
        if not isinstance(res, dict) or not res.get("url"):
            continue
        resources.append(ResourceRef(
            url=res["url"],
            title=res.get("name") or res.get("description"),
            format=res.get("format"),
            description=res.get("description") or "",
        ))
    if resources:
        provenance["resources[]"] = json.dumps([[r.title, r.format] for r in resources])

    url = doc.get("url") if isinstance(doc.get("url"), str) and doc.get("url") else None
    if url:
        provenance["url"] = url

    extras = _extras(doc)
    # Unmapped but structured extras are retained so enrichment can re-examine them.
    for extra_key in ("spatial", "temporal"):
        if extras.get(extra_key):
            provenance[f"extras[{extra_key}]"] = extras[extra_key]
    return NormalizedRecord(
        source_id=source_id,
        native_id=native_id,
        title=title,
        standard="ckan",
        description=description,
        url=url,
        organization=organization,
        keywords=keywords,
        license=license_ref,
        space=_space(extras, provenance),
        time=_time(extras, provenance),
        resources=tuple(resources),
        raw_provenance=provenance,
    )

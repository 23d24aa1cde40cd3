"""Source-neutral dataset records produced by the catalog parsers.

Every harvested document, whatever its native standard, is reduced to one
NormalizedRecord before it touches the graph. Identity is the pair
(source_id, native_id). Each populated field keeps the original source path
and value in ``raw_provenance`` so a record is auditable back to its
document.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterator

from .errors import MissingRequiredField
from .geometry import BBox, TimeInterval

STANDARDS = ("stac", "ckan", "fgdc")

#: Joins source_id and native_id into a globally unique dataset identity.
ID_SEPARATOR = "::"


@dataclass(frozen=True)
class OrgRef:
    title: str
    id: str | None = None
    description: str = ""


@dataclass(frozen=True)
class LicenseRef:
    title: str
    id: str | None = None


@dataclass(frozen=True)
class ResourceRef:
    """A distribution or link attached to a dataset."""

    url: str
    title: str | None = None
    format: str | None = None
    description: str = ""


@dataclass(frozen=True)
class NormalizedRecord:
    source_id: str
    native_id: str
    title: str
    standard: str
    description: str = ""
    url: str | None = None
    organization: OrgRef | None = None
    keywords: tuple[str, ...] = ()
    license: LicenseRef | None = None
    space: BBox | None = None
    time: TimeInterval | None = None
    resources: tuple[ResourceRef, ...] = ()
    raw_provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.source_id.strip():
            raise MissingRequiredField("record has no source_id")
        if not self.native_id.strip():
            raise MissingRequiredField("record has no native id")
        if not self.title.strip():
            raise MissingRequiredField(f"record {self.native_id!r} has no title")
        if self.standard not in STANDARDS:
            raise ValueError(f"unknown metadata standard: {self.standard!r}")

    @property
    def identity(self) -> str:
        return f"{self.source_id}{ID_SEPARATOR}{self.native_id}"

    def formats(self) -> tuple[str, ...]:
        """Distinct distribution formats, in first-seen order."""
        seen: dict[str, None] = {}
        for res in self.resources:
            if res.format and res.format.strip():
                seen.setdefault(" ".join(res.format.split()), None)
        return tuple(seen)

    def as_dict(self) -> dict:
        """JSON-ready form for staging files; from_dict inverts it."""
        return {
            "source_id": self.source_id,
            "native_id": self.native_id,
            "title": self.title,
            "standard": self.standard,
            "description": self.description,
            "url": self.url,
            "organization": (
                {"title": self.organization.title, "id": self.organization.id,
                 "description": self.organization.description}
                if self.organization else None),
            "keywords": list(self.keywords),
            "license": (
                {"title": self.license.title, "id": self.license.id}
                if self.license else None),
            "space": self.space.as_list() if self.space else None,
            "time": (
                [self.time.begin.isoformat(),
                 self.time.end.isoformat() if self.time.end else None]
                if self.time else None),
            "resources": [
                {"url": r.url, "title": r.title, "format": r.format,
                 "description": r.description}
                for r in self.resources],
            "raw_provenance": dict(self.raw_provenance),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> NormalizedRecord:
        org = payload.get("organization")
        lic = payload.get("license")
        space = payload.get("space")
        time = payload.get("time")
        return cls(
            source_id=payload["source_id"],
            native_id=payload["native_id"],
            title=payload["title"],
            standard=payload["standard"],
            description=payload.get("description", ""),
            url=payload.get("url"),
            organization=OrgRef(**org) if org else None,
            keywords=tuple(payload.get("keywords") or ()),
            license=LicenseRef(**lic) if lic else None,
            space=BBox(*space) if space else None,
            time=TimeInterval(
                datetime.fromisoformat(time[0]),
                datetime.fromisoformat(time[1]) if time[1] else None,
            ) if time else None,
            resources=tuple(ResourceRef(**r) for r in payload.get("resources") or ()),
            raw_provenance=dict(payload.get("raw_provenance") or {}),
        )


@dataclass(frozen=True)
class SourceConfig:
    """One catalog endpoint to harvest."""

    source_id: str
    standard: str
    base_url: str
    page_size: int = 100
    auth_token: str | None = None
    rate_limit: float = 10.0  # requests per second
    dataset_filter: str | None = None  # e.g. CKAN fq fragment
    document_ids: tuple[str, ...] = ()  # per-document standards (fgdc) list what to fetch

    def __post_init__(self) -> None:
        if self.standard not in STANDARDS:
            raise ValueError(f"unknown metadata standard: {self.standard!r}")
        if self.page_size < 1:
            raise ValueError("page_size must be at least 1")
        if self.rate_limit <= 0:
            raise ValueError("rate_limit must be positive")


@dataclass
class HarvestReport:
    """Per-source tally of what a harvest run did."""

    source_id: str
    fetched: int = 0
    parsed_ok: int = 0
    parse_failures: list[tuple[str, str]] = field(default_factory=list)  # (native_id, reason)
    started: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    finished: datetime | None = None

    def record_failure(self, native_id: str, reason: str) -> None:
        self.parse_failures.append((native_id, reason))

    def close(self) -> None:
        self.finished = datetime.now(timezone.utc)
        if self.parsed_ok + len(self.parse_failures) != self.fetched:
            raise AssertionError("harvest accounting mismatch")

    def lines(self) -> Iterator[str]:
        yield (f"source {self.source_id}: fetched {self.fetched}, "
               f"parsed {self.parsed_ok}, failed {len(self.parse_failures)}")
        for native_id, reason in self.parse_failures:
            yield f"  failed {native_id}: {reason}"

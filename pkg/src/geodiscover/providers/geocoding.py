"""Offline place-name resolution backed by a bundled gazetteer table."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol

from ..geometry import BBox


class Geocoder(Protocol):
    def geocode(self, place_name: str) -> BBox | None: ...


def _fold(name: str) -> str:
    return " ".join(name.split()).casefold()


@dataclass(frozen=True)
class GazetteerEntry:
    name: str
    bbox: BBox
    aliases: tuple[str, ...] = field(default_factory=tuple)


class Gazetteer:
    """Case-insensitive name and alias lookup over a fixed set of places."""

    def __init__(self, entries: list[GazetteerEntry]):
        self._by_name: dict[str, GazetteerEntry] = {}
        for entry in entries:
            for key in (entry.name, *entry.aliases):
                folded = _fold(key)
                existing = self._by_name.get(folded)
                if existing is not None and existing is not entry:
                    raise ValueError(f"gazetteer name collision: {key!r}")
                self._by_name[folded] = entry

    def geocode(self, place_name: str) -> BBox | None:
        entry = self._by_name.get(_fold(place_name))
        return entry.bbox if entry else None

    def known_names(self) -> list[str]:
        """All resolvable names and aliases, casefolded."""
        return sorted(self._by_name)

    def __len__(self) -> int:
        return len({id(e) for e in self._by_name.values()})

    @classmethod
    def from_json(cls, path: str | Path) -> Gazetteer:
        with open(path, encoding="utf-8") as fh:
            return cls._from_payload(json.load(fh))

    @classmethod
    def bundled(cls) -> Gazetteer:
        """The gazetteer shipped with the package (CONUS plus US states)."""
        text = resources.files("geodiscover.data").joinpath("gazetteer.json").read_text("utf-8")
        return cls._from_payload(json.loads(text))

    @classmethod
    def _from_payload(cls, payload: dict) -> Gazetteer:
        entries = []
        for row in payload["places"]:
            entries.append(GazetteerEntry(
                name=row["name"],
                bbox=BBox(*row["bbox"]),
                aliases=tuple(row.get("aliases", [])),
            ))
        return cls(entries)

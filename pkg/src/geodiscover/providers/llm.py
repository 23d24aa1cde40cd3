"""LLM provider interface and the deterministic scripted implementation.

The scripted provider answers tasks from a fingerprint table loaded from
JSON: each entry names a task kind, a match condition, and the raw output to
return. Entries are tried in file order; exact matches compare casefolded,
whitespace-collapsed text, ``<field>_regex`` keys do a case-insensitive
regex search, and an empty match object is a catch-all for its task kind.
Intent extraction additionally has a rule-based fallback so ad-hoc queries
work without a script entry; every other unmatched task raises
UnscriptedTask and the pipeline applies its per-stage fallback.
"""
from __future__ import annotations

import json
import re
import time
from pathlib import Path
from typing import Any, Callable, Protocol, TypeVar

from ..errors import ProviderFailure, UnscriptedTask
from .tasks import IntentExtraction, PromptTask
from .timetext import parse_time_text

T = TypeVar("T")


class LlmProvider(Protocol):
    def complete(self, task: PromptTask) -> Any:
        """Run one task and return its validated, typed output."""
        ...


def call_with_retries(
    fn: Callable[[], T],
    attempts: int = 3,
    base_delay: float = 0.05,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Run ``fn`` with exponential backoff on retryable provider failures."""
    if attempts < 1:
        raise ValueError("attempts must be at least 1")
    last: ProviderFailure | None = None
    for attempt in range(attempts):
        try:
            return fn()
        except ProviderFailure as exc:
            if not exc.retryable:
                raise
            last = exc
            if attempt + 1 < attempts:
                sleep(base_delay * (2 ** attempt))
    assert last is not None
    raise last


def _norm(value: Any) -> Any:
    if isinstance(value, str):
        return " ".join(value.split()).casefold()
    if isinstance(value, list):
        return [_norm(v) for v in value]
    if isinstance(value, dict):
        return {k: _norm(v) for k, v in value.items()}
    return value


def _matches(match: dict[str, Any], fingerprint: dict[str, Any]) -> bool:
    for key, expected in match.items():
        if key.endswith("_regex"):
            field = fingerprint.get(key[: -len("_regex")])
            text = field if isinstance(field, str) else json.dumps(field, sort_keys=True)
            if not re.search(expected, text, re.IGNORECASE):
                return False
            continue
        actual = fingerprint.get(key)
        if isinstance(expected, dict) and isinstance(actual, dict):
            # Subset semantics: every scripted key must agree, extras are fine.
            normed = _norm(actual)
            if any(normed.get(k) != _norm(v) for k, v in expected.items()):
                return False
            continue
        if _norm(actual) != _norm(expected):
            return False
    return True


class ScriptedLlm:
    """Table-driven provider used for tests, fixtures, and offline runs."""

    def __init__(self, entries: list[dict[str, Any]] | None = None):
        self._entries: list[dict[str, Any]] = []
        for entry in entries or []:
            self._add(entry)

    def _add(self, entry: dict[str, Any]) -> None:
        for required in ("task", "output"):
            if required not in entry:
                raise ValueError(f"script entry missing {required!r}: {entry}")
        if not isinstance(entry.get("match", {}), dict):
            raise ValueError(f"script entry 'match' must be an object: {entry}")
        self._entries.append(entry)

    @classmethod
    def from_json(cls, path: str | Path) -> ScriptedLlm:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(payload["entries"])

    def complete(self, task: PromptTask) -> Any:
        fingerprint = task.fingerprint()
        for entry in self._entries:
            if entry["task"] != task.task_name:
                continue
            if _matches(entry.get("match", {}), fingerprint):
                return task.validate_output(entry["output"])
        if isinstance(task, IntentExtraction):
            return task.validate_output(extract_intent_by_rules(task.query))
        raise UnscriptedTask(
            f"no script entry for {task.task_name}: {json.dumps(fingerprint, sort_keys=True)[:200]}"
        )


# --- rule-based intent extraction fallback ---

_FORMAT_WORDS = (
    "geotiff", "netcdf", "csv", "shapefile", "geojson", "json", "zip", "grib",
    "hdf", "parquet", "tiff", "kml", "esri rest",
)

_LICENSE_PHRASES = (
    "public domain", "cc-by", "cc by", "cc0", "creative commons", "open data commons",
)

_ORG_CUE = re.compile(
    r"\b(?:published by|provided by|produced by|from)\s+(?:the\s+)?"
    r"((?:[A-Z][\w.&'-]*|of|and)(?:\s+(?:[A-Z][\w.&'-]*|of|and))*)"
)

_TIME_CUE = re.compile(r"\b(?:from|between|since|during|for|in|through|until|before|after)\s*$")

_LEAD_IN = re.compile(
    r"^(?:i\s+(?:need|want|am looking for|would like)(?:\s+to\s+(?:get|find|download))?"
    r"|find(?:\s+me)?|show\s+me|looking\s+for|get\s+me|get|search\s+for|give\s+me)\b[\s,]*",
    re.IGNORECASE,
)

_NOISE_WORDS = {
    "data", "datasets", "dataset", "some", "any", "please", "the", "a", "an",
    "of", "for", "in", "on", "about", "covering", "over", "across", "me",
    "what", "which", "when", "where", "who", "how", "do", "you", "have",
    "there", "is", "are", "and", "also", "too", "instead",
}


def _place_names() -> list[str]:
    # Imported lazily so the embedder stack does not pull gazetteer data.
    from .geocoding import Gazetteer

    names = Gazetteer.bundled().known_names()
    names.sort(key=lambda n: (-len(n), n))
    return names


_PLACE_CACHE: list[str] | None = None


def extract_intent_by_rules(query: str) -> dict[str, str]:
    """Deterministic single-pass intent extraction for unscripted queries."""
    global _PLACE_CACHE
    if _PLACE_CACHE is None:
        _PLACE_CACHE = _place_names()

    working = query
    out: dict[str, str] = {}

    org = _ORG_CUE.search(working)
    if org:
        out["organization"] = org.group(1)
        working = working[: org.start()] + " " + working[org.end():]

    interval = parse_time_text(working)
    if interval is not None:
        time_match = re.search(
            r"((?:from|between|since|during)\s+)?\d{4}[\w:+\-]*(\s*(?:to|through|until|and|[-–/])\s*"
            r"(?:present|now|ongoing|today|\d{4}[\w:+\-]*))?",
            working,
            re.IGNORECASE,
        )
        if time_match:
            out["time_text"] = time_match.group(0).strip()
            working = working[: time_match.start()] + " " + working[time_match.end():]

    folded = " ".join(working.split()).casefold()
    for place in _PLACE_CACHE:
        idx = folded.find(place)
        if idx < 0:
            continue
        before = folded[idx - 1] if idx > 0 else " "
        after_i = idx + len(place)
        after = folded[after_i] if after_i < len(folded) else " "
        if before.isalnum() or after.isalnum():
            continue
        out["space_text"] = place
        folded = folded[:idx] + " " + folded[after_i:]
        break

    for fmt in _FORMAT_WORDS:
        if re.search(rf"\b{re.escape(fmt)}\b", folded):
            out["format"] = fmt
            folded = re.sub(rf"\b{re.escape(fmt)}\b", " ", folded)
            break

    for lic in _LICENSE_PHRASES:
        if lic in folded:
            out["license"] = lic
            folded = folded.replace(lic, " ")
            break

    folded = _LEAD_IN.sub("", folded)
    folded = _TIME_CUE.sub("", folded.strip())
    tokens = [t for t in re.split(r"[^\w-]+", folded) if t and t not in _NOISE_WORDS]
    if tokens:
        out["topic"] = " ".join(tokens)
    return out

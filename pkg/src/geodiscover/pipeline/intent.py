"""Intent parsing: extraction, confidence gating, and normalization.

A user query becomes a structured intent in three steps: optional query
expansion, slot extraction, and a per-dimension confidence check. Stated
space and time texts are then normalized to a bounding box and a UTC
interval; failures there come back as clarification requests instead of
silently dropping the dimension the user asked for.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ProviderFailure, UnscriptedTask
from ..geometry import BBox, TimeInterval
from ..providers.geocoding import Geocoder
from ..providers.llm import LlmProvider, call_with_retries
from ..providers.tasks import (
    ConfidenceAssessment,
    IntentExtraction,
    NewQuestionDetection,
    QueryExpansion,
    Routing,
)
from ..providers.timetext import parse_time_text
from .config import DIMENSIONS, PipelineConfig
from .session import ClarificationRequest

# Extraction slot name -> canonical dimension name.
_SLOT_TO_DIMENSION = {
    "topic": "topic",
    "space_text": "space",
    "time_text": "time",
    "organization": "organization",
    "format": "format",
    "license": "license",
}


@dataclass(frozen=True)
class Confidence:
    """Weighted blend of extraction accuracy and semantic plausibility."""

    accuracy: float
    plausibility: float
    alpha: float
    beta: float

    @property
    def value(self) -> float:
        return self.alpha * self.accuracy + self.beta * self.plausibility

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "plausibility": self.plausibility,
            "alpha": self.alpha,
            "beta": self.beta,
            "value": self.value,
        }


@dataclass(frozen=True)
class SpaceConstraint:
    text: str
    bbox: BBox

    def as_dict(self) -> dict:
        return {"text": self.text, "bbox": self.bbox.as_list()}


@dataclass(frozen=True)
class TimeConstraint:
    text: str
    interval: TimeInterval

    def as_dict(self) -> dict:
        return {
            "text": self.text,
            "begin": self.interval.begin.isoformat(),
            "end": None if self.interval.is_open else self.interval.end.isoformat(),
        }


@dataclass(frozen=True)
class GeoIntent:
    """Structured search constraints distilled from one or more turns.

    ``texts`` keeps the raw extracted phrase per stated dimension so a
    later refinement can overlay it; normalized forms live in the typed
    fields. ``origin`` records whether this intent started a thread or
    refined an earlier question.
    """

    texts: dict[str, str]
    topic: str | None = None
    space: SpaceConstraint | None = None
    time: TimeConstraint | None = None
    organization: str | None = None
    format: str | None = None
    license: str | None = None
    sources: tuple[str, ...] | None = None
    confidences: dict[str, Confidence] = field(default_factory=dict)
    origin: str = "new"

    def present_dimensions(self) -> tuple[str, ...]:
        return tuple(d for d in DIMENSIONS if d in self.texts)

    @property
    def overall_confidence(self) -> float | None:
        """Minimum per-dimension confidence; None when nothing was assessed."""
        if not self.confidences:
            return None
        return min(c.value for c in self.confidences.values())

    def as_dict(self) -> dict:
        return {
            "texts": dict(self.texts),
            "topic": self.topic,
            "space": self.space.as_dict() if self.space else None,
            "time": self.time.as_dict() if self.time else None,
            "organization": self.organization,
            "format": self.format,
            "license": self.license,
            "sources": list(self.sources) if self.sources is not None else None,
            "confidences": {k: v.as_dict() for k, v in self.confidences.items()},
            "origin": self.origin,
        }


def detect_new_question(llm: LlmProvider, history: list[str], query: str) -> bool:
    """Decide whether the query opens a new thread or refines the last one.

    An empty history is trivially a new question. Provider failure falls
    back to the conservative answer (new question).
    """
    if not history:
        return True
    task = NewQuestionDetection(history=tuple(history), query=query)
    try:
        result = call_with_retries(lambda: llm.complete(task))
    except ProviderFailure:
        return True
    return result.is_new


def route_query(llm: LlmProvider, query: str) -> bool:
    """True when the query asks for data discovery; fails open to True."""
    task = Routing(query=query)
    try:
        result = call_with_retries(lambda: llm.complete(task))
    except ProviderFailure:
        return True
    return result.is_discovery


def expand_query(llm: LlmProvider, query: str, history: list[str]) -> str:
    """Optionally rewrite the query for recall; unscripted means unchanged."""
    task = QueryExpansion(query=query, context=tuple(history))
    try:
        result = call_with_retries(lambda: llm.complete(task))
    except UnscriptedTask:
        return query
    rewritten = result.rewritten.strip()
    return rewritten or query


def extract_draft(llm: LlmProvider, query: str, history: list[str]) -> dict[str, str]:
    """Extract stated dimensions as raw text, keyed by canonical name."""
    task = IntentExtraction(query=query, context=tuple(history))
    draft_obj = call_with_retries(lambda: llm.complete(task))
    draft: dict[str, str] = {}
    for slot, dimension in _SLOT_TO_DIMENSION.items():
        value = getattr(draft_obj, slot)
        if value is not None and value.strip():
            draft[dimension] = value.strip()
    return draft


def assess_confidence(
    llm: LlmProvider, cfg: PipelineConfig, query: str, draft: dict[str, str]
) -> dict[str, Confidence]:
    """Score each extracted dimension; unscripted assessments pass open."""
    confidences: dict[str, Confidence] = {}
    for dimension in DIMENSIONS:
        if dimension not in draft:
            continue
        task = ConfidenceAssessment(query=query, extracted={dimension: draft[dimension]})
        try:
            scores = call_with_retries(lambda: llm.complete(task))
        except UnscriptedTask:
            scores = None
        if scores is None:
            confidences[dimension] = Confidence(1.0, 1.0, cfg.alpha, cfg.beta)
        else:
            confidences[dimension] = Confidence(scores.A, scores.P, cfg.alpha, cfg.beta)
    return confidences


def _low_confidence_question(draft: dict[str, str], low: tuple[str, ...]) -> str:
    parts = [f'{dim} "{draft[dim]}"' for dim in low]
    return (
        "I am not sure I understood the "
        + " and the ".join(parts)
        + " part of your request. Could you restate it more specifically?"
    )


def normalize_draft(
    draft: dict[str, str],
    confidences: dict[str, Confidence],
    geocoder: Geocoder,
    cfg: PipelineConfig,
    origin: str,
) -> GeoIntent | ClarificationRequest:
    """Turn a gated draft into a normalized intent, or ask for help.

    The confidence gate runs first: any stated dimension scoring below
    the threshold sends the draft back to the user. Then space text must
    geocode and time text must parse; either failure is a clarification
    because the user explicitly asked for that constraint.
    """
    if not draft:
        return ClarificationRequest(
            question=(
                "I could not find a topic, place, time range, or any other "
                "constraint in your request. What data are you looking for?"
            ),
            dimensions=(),
            reason="no-dimensions",
            draft={},
            confidences={},
            origin=origin,
        )

    low = tuple(
        dim
        for dim in DIMENSIONS
        if dim in draft
        and confidences.get(dim) is not None
        and confidences[dim].value < cfg.confidence_threshold
    )
    if low:
        return ClarificationRequest(
            question=_low_confidence_question(draft, low),
            dimensions=low,
            reason="low-confidence",
            draft=dict(draft),
            confidences=dict(confidences),
            origin=origin,
        )

    space = None
    if "space" in draft:
        bbox = geocoder.geocode(draft["space"])
        if bbox is None:
            return ClarificationRequest(
                question=(
                    f'I could not locate "{draft["space"]}" on the map. '
                    "Could you name a more specific region?"
                ),
                dimensions=("space",),
                reason="geocode-miss",
                draft=dict(draft),
                confidences=dict(confidences),
                origin=origin,
            )
        space = SpaceConstraint(text=draft["space"], bbox=bbox)

    time = None
    if "time" in draft:
        interval = parse_time_text(draft["time"])
        if interval is None:
            return ClarificationRequest(
                question=(
                    f'I could not read "{draft["time"]}" as a time range. '
                    "Could you give explicit dates or years?"
                ),
                dimensions=("time",),
                reason="time-parse",
                draft=dict(draft),
                confidences=dict(confidences),
                origin=origin,
            )
        time = TimeConstraint(text=draft["time"], interval=interval)

    return GeoIntent(
        texts=dict(draft),
        topic=draft.get("topic"),
        space=space,
        time=time,
        organization=draft.get("organization"),
        format=draft.get("format"),
        license=draft.get("license"),
        sources=cfg.sources,
        confidences=dict(confidences),
        origin=origin,
    )


def parse_intent(
    llm: LlmProvider,
    geocoder: Geocoder,
    cfg: PipelineConfig,
    query: str,
    history: list[str],
    prior_draft: dict[str, str] | None = None,
    prior_confidences: dict[str, Confidence] | None = None,
    origin: str = "new",
) -> tuple[GeoIntent | ClarificationRequest, dict]:
    """Parse one turn into an intent, overlaying any prior draft.

    ``prior_draft`` carries the dimensions of the question being refined
    or clarified; dimensions stated in this turn overwrite, the rest are
    inherited along with their confidences. Returns the outcome plus a
    detail mapping for the trace (expanded query, changed dimensions).

    Raises ProviderFailure when extraction stays unavailable after
    retries; the caller turns that into a clarification.
    """
    expanded = expand_query(llm, query, history)
    update = extract_draft(llm, expanded, history)

    merged = dict(prior_draft or {})
    merged.update(update)

    confidences = dict(prior_confidences or {})
    confidences = {d: c for d, c in confidences.items() if d in merged}
    confidences.update(assess_confidence(llm, cfg, expanded, update))

    outcome = normalize_draft(merged, confidences, geocoder, cfg, origin)
    detail = {
        "expanded": expanded,
        "changed": sorted(update),
        "inherited": sorted(set(merged) - set(update)),
    }
    return outcome, detail


def merge_intent(prior: GeoIntent, update: GeoIntent, prior_index: int) -> GeoIntent:
    """Overlay a refinement on an earlier intent.

    Dimensions stated in the update replace the prior values; everything
    else is inherited unchanged. The result records its lineage.
    """
    texts = dict(prior.texts)
    texts.update(update.texts)
    confidences = dict(prior.confidences)
    confidences.update(update.confidences)

    def pick(dimension: str, new_value, old_value):
        return new_value if dimension in update.texts else old_value

    return GeoIntent(
        texts=texts,
        topic=pick("topic", update.topic, prior.topic),
        space=pick("space", update.space, prior.space),
        time=pick("time", update.time, prior.time),
        organization=pick("organization", update.organization, prior.organization),
        format=pick("format", update.format, prior.format),
        license=pick("license", update.license, prior.license),
        sources=update.sources if update.sources is not None else prior.sources,
        confidences=confidences,
        origin=f"refined-from:{prior_index}",
    )

"""Structured LLM task definitions.

Every LLM interaction in the pipeline is a typed task with a declared output
schema. Providers return plain dicts; ``validate_output`` turns them into
typed results or raises SchemaViolation, so no free text ever reaches the
pipeline where a schema is declared.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..errors import SchemaViolation

INTENT_DIMENSIONS = ("topic", "space_text", "time_text", "organization", "format", "license")


def _require_bool(raw: dict, key: str) -> bool:
    value = raw.get(key)
    if not isinstance(value, bool):
        raise SchemaViolation(f"{key!r} must be a boolean, got {value!r}")
    return value


def _require_str(raw: dict, key: str) -> str:
    value = raw.get(key)
    if not isinstance(value, str):
        raise SchemaViolation(f"{key!r} must be a string, got {value!r}")
    return value


def _optional_str(raw: dict, key: str) -> str | None:
    value = raw.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise SchemaViolation(f"{key!r} must be a string or absent, got {value!r}")
    return value or None


def _unit_float(raw: dict, key: str) -> float:
    value = raw.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaViolation(f"{key!r} must be a number, got {value!r}")
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise SchemaViolation(f"{key!r} must lie in [0,1], got {value}")
    return value


# --- outputs ---

@dataclass(frozen=True)
class NewQuestionResult:
    is_new: bool
    rationale: str


@dataclass(frozen=True)
class RoutingResult:
    is_discovery: bool


@dataclass(frozen=True)
class ExpansionResult:
    rewritten: str


@dataclass(frozen=True)
class IntentDraft:
    """Raw extracted constraint texts, one optional slot per dimension."""

    topic: str | None = None
    space_text: str | None = None
    time_text: str | None = None
    organization: str | None = None
    format: str | None = None
    license: str | None = None

    def present(self) -> dict[str, str]:
        return {d: v for d in INTENT_DIMENSIONS if (v := getattr(self, d)) is not None}


@dataclass(frozen=True)
class ConfidenceScores:
    """Extraction accuracy A and semantic plausibility P, both in [0,1]."""

    A: float
    P: float


@dataclass(frozen=True)
class TopicLabels:
    topics: tuple[str, ...]


@dataclass(frozen=True)
class SpaceTimeDraft:
    place_name: str | None = None
    begin: str | None = None
    end: str | None = None


@dataclass(frozen=True)
class ValidationResult:
    keep: tuple[str, ...]


@dataclass(frozen=True)
class SynthesisDraft:
    order: tuple[str, ...]
    summary: str
    rationales: dict[str, list[str]]


# --- tasks ---

@dataclass(frozen=True)
class PromptTask:
    """Base for all LLM task variants."""

    task_name = "PromptTask"

    def fingerprint(self) -> dict[str, Any]:
        """Fields a script table may match against."""
        raise NotImplementedError

    def validate_output(self, raw: dict) -> Any:
        raise NotImplementedError


@dataclass(frozen=True)
class NewQuestionDetection(PromptTask):
    history: tuple[str, ...]
    query: str
    task_name = "NewQuestionDetection"

    def fingerprint(self) -> dict[str, Any]:
        return {"query": self.query, "history": list(self.history)}

    def validate_output(self, raw: dict) -> NewQuestionResult:
        return NewQuestionResult(_require_bool(raw, "is_new"), raw.get("rationale", "") or "")


@dataclass(frozen=True)
class Routing(PromptTask):
    query: str
    task_name = "Routing"

    def fingerprint(self) -> dict[str, Any]:
        return {"query": self.query}

    def validate_output(self, raw: dict) -> RoutingResult:
        return RoutingResult(_require_bool(raw, "is_discovery"))


@dataclass(frozen=True)
class QueryExpansion(PromptTask):
    query: str
    context: tuple[str, ...] = ()
    task_name = "QueryExpansion"

    def fingerprint(self) -> dict[str, Any]:
        return {"query": self.query, "context": list(self.context)}

    def validate_output(self, raw: dict) -> ExpansionResult:
        return ExpansionResult(_require_str(raw, "rewritten"))


@dataclass(frozen=True)
class IntentExtraction(PromptTask):
    query: str
    context: tuple[str, ...] = ()
    task_name = "IntentExtraction"

    def fingerprint(self) -> dict[str, Any]:
        return {"query": self.query, "context": list(self.context)}

    def validate_output(self, raw: dict) -> IntentDraft:
        unknown = set(raw) - set(INTENT_DIMENSIONS)
        if unknown:
            raise SchemaViolation(f"unknown intent dimensions: {sorted(unknown)}")
        return IntentDraft(**{d: _optional_str(raw, d) for d in INTENT_DIMENSIONS})


@dataclass(frozen=True)
class ConfidenceAssessment(PromptTask):
    query: str
    extracted: dict[str, str] = field(default_factory=dict)
    task_name = "ConfidenceAssessment"

    def fingerprint(self) -> dict[str, Any]:
        return {"query": self.query, "extracted": dict(self.extracted)}

    def validate_output(self, raw: dict) -> ConfidenceScores:
        return ConfidenceScores(_unit_float(raw, "A"), _unit_float(raw, "P"))

    def __hash__(self) -> int:  # extracted dict is never mutated after construction
        return hash((self.query, tuple(sorted(self.extracted.items()))))


@dataclass(frozen=True)
class TopicGeneration(PromptTask):
    title: str
    description: str = ""
    task_name = "TopicGeneration"

    def fingerprint(self) -> dict[str, Any]:
        return {"title": self.title, "description": self.description}

    def validate_output(self, raw: dict) -> TopicLabels:
        topics = raw.get("topics")
        if not isinstance(topics, list) or not all(isinstance(t, str) and t.strip() for t in topics):
            raise SchemaViolation(f"'topics' must be a list of non-empty strings, got {topics!r}")
        if not 1 <= len(topics) <= 5:
            raise SchemaViolation(f"'topics' must hold 1..5 labels, got {len(topics)}")
        return TopicLabels(tuple(topics))


@dataclass(frozen=True)
class SpaceTimeExtraction(PromptTask):
    title: str
    description: str = ""
    task_name = "SpaceTimeExtraction"

    def fingerprint(self) -> dict[str, Any]:
        return {"title": self.title, "description": self.description}

    def validate_output(self, raw: dict) -> SpaceTimeDraft:
        return SpaceTimeDraft(
            place_name=_optional_str(raw, "place_name"),
            begin=_optional_str(raw, "begin"),
            end=_optional_str(raw, "end"),
        )


@dataclass(frozen=True)
class EntityValidation(PromptTask):
    intent: dict[str, Any]
    candidates: tuple[dict[str, Any], ...]  # each: {id, kind, label, dimension, cosine}
    task_name = "EntityValidation"

    def fingerprint(self) -> dict[str, Any]:
        return {
            "intent": dict(self.intent),
            "candidate_labels": [c.get("label", "") for c in self.candidates],
        }

    def validate_output(self, raw: dict) -> ValidationResult:
        keep = raw.get("keep")
        if not isinstance(keep, list) or not all(isinstance(k, str) for k in keep):
            raise SchemaViolation(f"'keep' must be a list of entity ids, got {keep!r}")
        allowed = {c["id"] for c in self.candidates}
        stray = set(keep) - allowed
        if stray:
            raise SchemaViolation(f"'keep' names unknown candidates: {sorted(stray)}")
        return ValidationResult(tuple(keep))

    def __hash__(self) -> int:
        return hash((tuple(sorted(self.intent.items())), len(self.candidates)))


@dataclass(frozen=True)
class AnswerSynthesis(PromptTask):
    query: str
    intent: dict[str, Any]
    history: tuple[str, ...]
    evidence: tuple[dict[str, Any], ...]  # one entry per Top K dataset
    task_name = "AnswerSynthesis"

    def fingerprint(self) -> dict[str, Any]:
        return {
            "query": self.query,
            "intent": dict(self.intent),
            "dataset_ids": [e.get("dataset_id", "") for e in self.evidence],
        }

    def validate_output(self, raw: dict) -> SynthesisDraft:
        order = raw.get("order")
        if not isinstance(order, list) or not all(isinstance(d, str) for d in order):
            raise SchemaViolation(f"'order' must be a list of dataset ids, got {order!r}")
        if len(order) != len(set(order)):
            raise SchemaViolation("'order' contains duplicate dataset ids")
        known = {e.get("dataset_id") for e in self.evidence}
        stray = set(order) - known
        if stray:
            raise SchemaViolation(f"'order' names datasets outside the Top K: {sorted(stray)}")
        if len(order) > len(self.evidence):
            raise SchemaViolation("'order' longer than the candidate list")
        rationales = raw.get("rationales", {})
        if not isinstance(rationales, dict):
            raise SchemaViolation("'rationales' must map dataset id to bullet list")
        clean: dict[str, list[str]] = {}
        for key, bullets in rationales.items():
            if not isinstance(bullets, list) or not all(isinstance(b, str) for b in bullets):
                raise SchemaViolation(f"rationales[{key!r}] must be a list of strings")
            clean[key] = list(bullets)
        return SynthesisDraft(tuple(order), _require_str(raw, "summary"), clean)

    def __hash__(self) -> int:
        return hash((self.query, len(self.evidence)))

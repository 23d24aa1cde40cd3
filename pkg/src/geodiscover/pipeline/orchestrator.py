"""Stage loop driving one conversation turn through the pipeline.

Each executed stage appends exactly one trace event per attempt. A turn
can suspend twice: on a clarification request (any parse problem the
user must resolve) and, in manual mode, on entity selection. Resume
entry points pick the pipeline back up from the suspended stage.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from ..errors import NothingPending, ProviderFailure, SessionBusy
from ..graph.store import GraphStore
from ..providers.embedding import EmbeddingProvider
from ..providers.geocoding import Geocoder
from ..providers.llm import LlmProvider
from .config import PipelineConfig
from .intent import GeoIntent, detect_new_question, parse_intent, route_query
from .retrieval import (
    CandidateEntity,
    ScoredDataset,
    apply_selection,
    match_entities,
    retrieve_and_score,
    validate_candidates,
)
from .session import ClarificationRequest, Question, SessionState
from .synthesis import SynthesisOutput, synthesize_answer

GENERAL_RESPONSE = (
    "I help with discovering geospatial datasets. Ask about a topic, a "
    "place, a time range, a provider, a format, or a license."
)


@dataclass(frozen=True)
class PipelineEnv:
    """Everything a pipeline run needs besides the conversation itself."""

    store: GraphStore
    llm: LlmProvider
    embedder: EmbeddingProvider
    geocoder: Geocoder


@dataclass(frozen=True)
class GeneralAnswer:
    """Reply to a query that is not a data-discovery request."""

    question_index: int
    text: str

    def as_dict(self) -> dict:
        return {"kind": "general", "question": self.question_index, "text": self.text}


@dataclass(frozen=True)
class EntitySelectionRequest:
    """Manual-mode checkpoint: the user picks which candidates to keep."""

    question_index: int
    candidates: tuple[CandidateEntity, ...]
    intent: GeoIntent

    def as_dict(self) -> dict:
        return {
            "kind": "entity-selection",
            "question": self.question_index,
            "candidates": [c.as_dict() for c in self.candidates],
        }


@dataclass(frozen=True)
class DiscoveryAnswer:
    """A completed discovery turn: intent, ranked evidence, final answer."""

    question_index: int
    query: str
    intent: GeoIntent
    ranked: list[ScoredDataset] = field(default_factory=list)
    synthesis: SynthesisOutput | None = None

    def as_dict(self) -> dict:
        synthesis = self.synthesis
        by_id = {item.dataset_id: item for item in self.ranked}
        results = []
        if synthesis is not None:
            for position, did in enumerate(synthesis.order, start=1):
                entry = by_id[did].as_dict()
                entry["position"] = position
                entry["rationale"] = list(synthesis.rationales.get(did, []))
                results.append(entry)
        return {
            "kind": "results",
            "question": self.question_index,
            "query": self.query,
            "intent": self.intent.as_dict(),
            "results": results,
            "ranked": [item.as_dict() for item in self.ranked],
            "summary": synthesis.summary if synthesis else "",
            "degraded": synthesis.degraded if synthesis else False,
        }


def _ms(started: float) -> float:
    return (time.perf_counter() - started) * 1000.0


def _clarification_outputs(request: ClarificationRequest) -> dict:
    return {
        "clarification": True,
        "reason": request.reason,
        "dimensions": list(request.dimensions),
    }


def _prior_intent_index(session: SessionState, before: int) -> int | None:
    """Most recent earlier question that resolved to an intent."""
    for i in range(before - 1, -1, -1):
        if session.questions[i].intent is not None:
            return i
    return None


def run_discovery(
    session: SessionState,
    env: PipelineEnv,
    cfg: PipelineConfig,
    query: str,
):
    """Run one user turn; may return an answer or suspend on a checkpoint."""
    if session.pending_clarification is not None or session.pending_selection is not None:
        raise SessionBusy("answer the pending request before asking something new")

    history = session.history()
    qidx = len(session.questions)
    session.questions.append(Question(query=query))
    session.active_index = qidx

    stage = "detection"
    try:
        is_new = True
        if history:
            session.emit_stage(qidx, "detection", "started")
            started = time.perf_counter()
            is_new = detect_new_question(env.llm, history, query)
            session.record_event(
                qidx,
                "detection",
                "finished",
                {"query": query, "history": history},
                {"is_new": is_new},
                _ms(started),
            )

        stage = "routing"
        session.emit_stage(qidx, "routing", "started")
        started = time.perf_counter()
        is_discovery = route_query(env.llm, query)
        session.record_event(
            qidx, "routing", "finished", {"query": query}, {"is_discovery": is_discovery}, _ms(started)
        )
        if not is_discovery:
            session.questions[qidx].general_response = GENERAL_RESPONSE
            return GeneralAnswer(question_index=qidx, text=GENERAL_RESPONSE)

        prior_draft = None
        prior_confidences = None
        origin = "new"
        if not is_new:
            prior_index = _prior_intent_index(session, qidx)
            if prior_index is not None:
                prior = session.questions[prior_index].intent
                prior_draft = dict(prior.texts)
                prior_confidences = dict(prior.confidences)
                origin = f"refined-from:{prior_index}"

        stage = "parsing"
        session.emit_stage(qidx, "parsing", "started")
        started = time.perf_counter()
        inputs = {"query": query, "origin": origin, "prior": prior_draft or {}}
        try:
            outcome, detail = parse_intent(
                env.llm,
                env.geocoder,
                cfg,
                query,
                history,
                prior_draft=prior_draft,
                prior_confidences=prior_confidences,
                origin=origin,
            )
        except ProviderFailure:
            outcome = ClarificationRequest(
                question=(
                    "I could not parse your request because the language "
                    "model is unavailable. Please try again or rephrase."
                ),
                dimensions=(),
                reason="provider-failure",
                draft=dict(prior_draft or {}),
                confidences=dict(prior_confidences or {}),
                origin=origin,
            )
            detail = {}
        if isinstance(outcome, ClarificationRequest):
            session.pending_clarification = outcome
            session.record_event(
                qidx, "parsing", "awaiting-user", inputs, _clarification_outputs(outcome), _ms(started)
            )
            return outcome
        session.record_event(
            qidx, "parsing", "finished", inputs, outcome.as_dict(), _ms(started), detail
        )
    except Exception as exc:
        session.record_event(
            qidx,
            stage,
            "failed",
            {"query": query},
            {"error": type(exc).__name__, "message": str(exc)},
            0.0,
        )
        raise

    return _continue_from_matching(session, env, cfg, qidx, outcome)


def _continue_from_matching(
    session: SessionState,
    env: PipelineEnv,
    cfg: PipelineConfig,
    qidx: int,
    intent: GeoIntent,
):
    stage = "matching"
    try:
        session.emit_stage(qidx, "matching", "started")
        started = time.perf_counter()
        candidates = match_entities(env.store, env.embedder, cfg, intent)
        if cfg.execution_mode == "manual" and candidates:
            request = EntitySelectionRequest(
                question_index=qidx, candidates=tuple(candidates), intent=intent
            )
            session.pending_selection = request
            session.record_event(
                qidx,
                "matching",
                "awaiting-user",
                intent.as_dict(),
                {"candidates": [c.as_dict() for c in candidates]},
                _ms(started),
            )
            return request
        validated = validate_candidates(env.llm, intent, candidates)
        session.record_event(
            qidx,
            "matching",
            "finished",
            intent.as_dict(),
            {"candidates": [c.as_dict() for c in validated]},
            _ms(started),
        )
    except Exception as exc:
        session.record_event(
            qidx, stage, "failed", {}, {"error": type(exc).__name__, "message": str(exc)}, 0.0
        )
        raise

    return _continue_from_retrieval(session, env, cfg, qidx, intent, validated)


def _continue_from_retrieval(
    session: SessionState,
    env: PipelineEnv,
    cfg: PipelineConfig,
    qidx: int,
    intent: GeoIntent,
    candidates: list[CandidateEntity],
):
    question = session.questions[qidx]
    stage = "retrieval"
    try:
        session.emit_stage(qidx, "retrieval", "started")
        started = time.perf_counter()
        ranked = retrieve_and_score(env.store, cfg, intent, candidates)
        session.record_event(
            qidx,
            "retrieval",
            "finished",
            intent.as_dict(),
            {"ranked": [item.as_dict() for item in ranked]},
            _ms(started),
        )

        stage = "synthesis"
        session.emit_stage(qidx, "synthesis", "started")
        started = time.perf_counter()
        synthesis = synthesize_answer(
            env.store, env.llm, cfg, question.query, intent, session.history(), ranked
        )
        session.record_event(
            qidx,
            "synthesis",
            "finished",
            {"ranked": [item.dataset_id for item in ranked]},
            synthesis.as_dict(),
            _ms(started),
        )

        question.intent = intent
        question.ranked = ranked
        question.synthesis = synthesis
        return DiscoveryAnswer(
            question_index=qidx,
            query=question.query,
            intent=intent,
            ranked=ranked,
            synthesis=synthesis,
        )
    except Exception as exc:
        session.record_event(
            qidx, stage, "failed", {}, {"error": type(exc).__name__, "message": str(exc)}, 0.0
        )
        raise


def handle_clarification(
    session: SessionState,
    env: PipelineEnv,
    cfg: PipelineConfig,
    text: str,
):
    """Resume a suspended turn with the user's answer, re-running the parse."""
    pending = session.pending_clarification
    if pending is None:
        raise NothingPending("no clarification is awaited")
    session.pending_clarification = None

    qidx = session.active_index
    question = session.questions[qidx]
    history = [q.query for i, q in enumerate(session.questions) if i != qidx]

    stage = "parsing"
    try:
        session.emit_stage(qidx, "parsing", "started")
        started = time.perf_counter()
        inputs = {"query": text, "origin": pending.origin, "prior": dict(pending.draft)}
        try:
            outcome, detail = parse_intent(
                env.llm,
                env.geocoder,
                cfg,
                text,
                history,
                prior_draft=dict(pending.draft),
                prior_confidences=dict(pending.confidences),
                origin=pending.origin,
            )
        except ProviderFailure:
            outcome = ClarificationRequest(
                question=(
                    "I could not parse your answer because the language "
                    "model is unavailable. Please try again."
                ),
                dimensions=pending.dimensions,
                reason="provider-failure",
                draft=dict(pending.draft),
                confidences=dict(pending.confidences),
                origin=pending.origin,
            )
            detail = {}
        if isinstance(outcome, ClarificationRequest):
            session.pending_clarification = outcome
            session.record_event(
                qidx, "parsing", "awaiting-user", inputs, _clarification_outputs(outcome), _ms(started)
            )
            return outcome
        session.record_event(
            qidx, "parsing", "finished", inputs, outcome.as_dict(), _ms(started), detail
        )
    except Exception as exc:
        session.record_event(
            qidx, stage, "failed", {"query": text}, {"error": type(exc).__name__, "message": str(exc)}, 0.0
        )
        raise

    return _continue_from_matching(session, env, cfg, qidx, outcome)


def handle_entity_selection(
    session: SessionState,
    env: PipelineEnv,
    cfg: PipelineConfig,
    keep_ids: list[str],
):
    """Resume a manual-mode turn with the user's candidate selection."""
    pending = session.pending_selection
    if pending is None:
        raise NothingPending("no entity selection is awaited")
    session.pending_selection = None

    qidx = pending.question_index
    session.emit_stage(qidx, "matching", "started")
    started = time.perf_counter()
    try:
        validated = apply_selection(list(pending.candidates), keep_ids)
    except ValueError as exc:
        session.pending_selection = pending
        raise ValueError(str(exc)) from exc
    session.record_event(
        qidx,
        "matching",
        "finished",
        {"keep": sorted(keep_ids)},
        {"candidates": [c.as_dict() for c in validated]},
        _ms(started),
    )
    return _continue_from_retrieval(session, env, cfg, qidx, pending.intent, validated)

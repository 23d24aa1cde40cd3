"""Conversation state: question memory, pending checkpoints, execution trace."""

from __future__ import annotations

import hashlib
import json
import time
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable


def digest(payload: Any) -> str:
    """Stable short digest of a JSON-serializable payload."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class TraceEvent:
    """One pipeline stage execution, recorded append-only.

    ``wall_ms`` is observability data and is excluded from the canonical
    form so repeated runs over the same snapshot compare byte-identical.
    """

    seq: int
    question_index: int
    stage: str
    status: str
    inputs_digest: str
    outputs_digest: str
    wall_ms: float
    detail: dict = field(default_factory=dict)

    def canonical(self) -> dict:
        event = {
            "seq": self.seq,
            "question": self.question_index,
            "stage": self.stage,
            "status": self.status,
            "inputs": self.inputs_digest,
            "outputs": self.outputs_digest,
        }
        if self.detail:
            event["detail"] = self.detail
        return event

    def as_dict(self) -> dict:
        event = self.canonical()
        event["wall_ms"] = self.wall_ms
        return event


@dataclass(frozen=True)
class ClarificationRequest:
    """A question back to the user, blocking the pipeline until answered.

    ``draft``, ``confidences``, and ``origin`` snapshot the suspended
    parse so the user's answer can be overlaid on it when work resumes.
    """

    question: str
    dimensions: tuple[str, ...]
    reason: str
    draft: dict = field(default_factory=dict)
    confidences: dict = field(default_factory=dict)
    origin: str = "new"

    def as_dict(self) -> dict:
        return {
            "question": self.question,
            "dimensions": list(self.dimensions),
            "reason": self.reason,
            "draft": dict(self.draft),
            "confidences": {k: v.as_dict() for k, v in self.confidences.items()},
        }


@dataclass
class Question:
    """One resolved user question and everything produced for it."""

    query: str
    intent: Any = None
    ranked: list = field(default_factory=list)
    synthesis: Any = None
    general_response: str | None = None


@dataclass
class SessionState:
    """All state for one conversation.

    ``pending_clarification`` and ``pending_selection`` are mutually
    exclusive checkpoints; while either is set, new queries are refused
    by the caller and only the matching resume call may proceed.

    Listeners receive live stage notifications (including "started"
    ones, which never enter the trace) so a service can stream progress.
    """

    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    questions: list[Question] = field(default_factory=list)
    active_index: int = -1
    pending_clarification: ClarificationRequest | None = None
    pending_selection: Any = None
    trace: list[TraceEvent] = field(default_factory=list)
    listeners: list[Callable[[dict], None]] = field(
        default_factory=list, repr=False, compare=False
    )

    def history(self) -> list[str]:
        return [q.query for q in self.questions]

    def active_question(self) -> Question | None:
        if 0 <= self.active_index < len(self.questions):
            return self.questions[self.active_index]
        return None

    def subscribe(self, listener: Callable[[dict], None]) -> None:
        self.listeners.append(listener)

    def emit_stage(
        self,
        question_index: int,
        stage: str,
        status: str,
        inputs: str = "",
        outputs: str = "",
        detail: dict | None = None,
    ) -> dict:
        """Push one stage notification to the listeners."""
        event = {
            "session": self.session_id,
            "question": question_index,
            "stage": stage,
            "status": status,
            "inputs": inputs,
            "outputs": outputs,
            "ts": time.time(),
        }
        if detail:
            event["detail"] = detail
        for listener in list(self.listeners):
            listener(event)
        return event

    def record_event(
        self,
        question_index: int,
        stage: str,
        status: str,
        inputs: Any,
        outputs: Any,
        wall_ms: float,
        detail: dict | None = None,
    ) -> TraceEvent:
        event = TraceEvent(
            seq=len(self.trace),
            question_index=question_index,
            stage=stage,
            status=status,
            inputs_digest=digest(inputs),
            outputs_digest=digest(outputs),
            wall_ms=wall_ms,
            detail=detail or {},
        )
        self.trace.append(event)
        self.emit_stage(
            question_index,
            stage,
            status,
            inputs=event.inputs_digest,
            outputs=event.outputs_digest,
            detail=detail,
        )
        return event


def canonical_trace(session: SessionState) -> str:
    """Serialize the trace deterministically, omitting wall-clock times."""
    lines = [
        json.dumps(event.canonical(), sort_keys=True, separators=(",", ":"))
        for event in session.trace
    ]
    return "\n".join(lines) + ("\n" if lines else "")

"""FastAPI application exposing sessions, datasets, and live stage events.

The service is a thin shell around the pipeline: it owns session
bookkeeping (locks, event fan-out, an append-only log) and never mutates
the graph snapshot it was given. Stage events streamed over
``/sessions/{id}/events`` are also persisted per session, so a client
that reconnects can replay exactly what it would have seen live.
"""
from __future__ import annotations

import json
import os
import queue
import threading
import time
from collections import defaultdict
from datetime import datetime, timezone
from typing import Any, Callable, Iterator

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from ..errors import NothingPending, SessionBusy, UnknownDataset
from ..graph.store import GraphStore
from ..ontology import EntityKind, RelationshipKind
from ..pipeline import (
    ClarificationRequest,
    PipelineConfig,
    PipelineEnv,
    SessionState,
    handle_clarification,
    handle_entity_selection,
    run_discovery,
)

HEARTBEAT_SECONDS = 10.0


class CreateSessionBody(BaseModel):
    config: dict | None = None


class TurnBody(BaseModel):
    text: str


class SelectBody(BaseModel):
    keep: list[str]


class ApiSession:
    """One conversation plus the service-side state the pipeline lacks."""

    def __init__(self, config: PipelineConfig):
        self.state = SessionState()
        self.config = config
        self.created_at = datetime.now(timezone.utc).isoformat()
        self.events: list[dict] = []
        self.subscribers: list[queue.SimpleQueue] = []
        # Serializes runs; concurrent turn requests get 409 instead of waiting.
        self.run_lock = threading.Lock()
        self.events_lock = threading.Lock()

    def publish(self, event: dict) -> dict:
        with self.events_lock:
            event = dict(event)
            event["seq"] = len(self.events)
            self.events.append(event)
            subscribers = list(self.subscribers)
        for sub in subscribers:
            sub.put(event)
        return event


def _interval_payload(interval) -> dict:
    return {
        "begin": interval.begin.isoformat(),
        "end": interval.end.isoformat() if interval.end is not None else None,
    }


def _entity_payload(entity) -> dict:
    out: dict[str, Any] = {
        "id": entity.id,
        "kind": entity.kind.value,
        "label": entity.label,
    }
    if entity.description:
        out["description"] = entity.description
    if entity.url:
        out["url"] = entity.url
    if entity.bbox is not None:
        out["bbox"] = entity.bbox.as_list()
    if entity.interval is not None:
        out["interval"] = _interval_payload(entity.interval)
    return out


def _subgraph_payload(store: GraphStore, dataset_id: str) -> dict:
    subg = store.extract_subgraph(dataset_id)
    return {
        "focus": subg.focus,
        "entities": [_entity_payload(e) for e in subg.entities],
        "relationships": [
            {"kind": r.kind.value, "from": r.from_id, "to": r.to_id}
            for r in subg.relationships
        ],
    }


def _dataset_payload(store: GraphStore, dataset_id: str) -> dict:
    subg = store.extract_subgraph(dataset_id)
    focus = store.entities[dataset_id]
    by_kind: dict[EntityKind, list] = defaultdict(list)
    for entity in subg.entities:
        by_kind[entity.kind].append(entity)

    resources = []
    for res in by_kind[EntityKind.RESOURCE]:
        fmt = next(
            (
                store.entities[rel.to_id].label
                for rel in store.out_edges(res.id, RelationshipKind.HAS_FORMAT)
            ),
            None,
        )
        resources.append(
            {"id": res.id, "label": res.label, "url": res.url, "format": fmt}
        )

    space = store.dataset_space(dataset_id)
    interval = store.dataset_time(dataset_id)
    licenses = by_kind[EntityKind.LICENSE]
    return {
        "id": dataset_id,
        "title": focus.label,
        "description": focus.description,
        "url": focus.url,
        "native_id": focus.source_native_id,
        "source": store.dataset_source(dataset_id),
        "bbox": space.as_list() if space is not None else None,
        "interval": _interval_payload(interval) if interval is not None else None,
        "organizations": sorted(e.label for e in by_kind[EntityKind.ORGANIZATION]),
        "topics": sorted(e.label for e in by_kind[EntityKind.TOPIC]),
        "keywords": sorted(e.label for e in by_kind[EntityKind.KEYWORD]),
        "formats": sorted({e.label for e in by_kind[EntityKind.FORMAT]}),
        "license": licenses[0].label if licenses else None,
        "resources": resources,
    }


def _question_summary(index: int, question) -> dict:
    if question.synthesis is not None:
        kind = "results"
    elif question.general_response is not None:
        kind = "general"
    else:
        kind = "pending"
    return {"index": index, "query": question.query, "kind": kind}


def create_app(
    store: GraphStore,
    llm,
    embedder,
    geocoder,
    default_config: PipelineConfig | None = None,
    session_log: str | None = None,
    api_token: str | None = None,
) -> FastAPI:
    """Build the app around one immutable snapshot and one provider set."""
    env = PipelineEnv(store=store, llm=llm, embedder=embedder, geocoder=geocoder)
    defaults = default_config if default_config is not None else PipelineConfig()
    token = api_token if api_token is not None else os.environ.get("GEODISCOVER_API_TOKEN")

    sessions: dict[str, ApiSession] = {}
    sessions_lock = threading.Lock()
    log_lock = threading.Lock()
    log_handle = open(session_log, "a", encoding="utf-8") if session_log else None

    def log(record: dict) -> None:
        # Append-only; the in-memory session map stays authoritative.
        if log_handle is None:
            return
        entry = {"ts": datetime.now(timezone.utc).isoformat(), **record}
        with log_lock:
            log_handle.write(json.dumps(entry, separators=(",", ":"), default=str) + "\n")
            log_handle.flush()

    def check_auth(request: Request) -> None:
        if token is None:
            return
        supplied = request.headers.get("authorization", "")
        if supplied != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid API token")

    app = FastAPI(title="geodiscover", dependencies=[Depends(check_auth)])

    def get_session(session_id: str) -> ApiSession:
        with sessions_lock:
            sess = sessions.get(session_id)
        if sess is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return sess

    def turn_payload(sess: ApiSession, answer) -> dict:
        if isinstance(answer, ClarificationRequest):
            body = answer.as_dict()
            body["kind"] = "clarification"
            qidx = sess.state.active_index
        else:
            body = answer.as_dict()
            qidx = answer.question_index
        body["session_id"] = sess.state.session_id
        body["trace_id"] = f"{sess.state.session_id}/{qidx}"
        return body

    def run_turn(sess: ApiSession, action: str, fn: Callable[[], Any]):
        if not sess.run_lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a run is already in flight")
        try:
            answer = fn()
        except SessionBusy as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except NothingPending as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except HTTPException:
            raise
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except Exception as exc:
            trace_id = f"{sess.state.session_id}/{sess.state.active_index}"
            log({"record": "error", "session": sess.state.session_id,
                 "action": action, "error": str(exc), "trace_id": trace_id})
            return JSONResponse(
                status_code=500,
                content={"error": str(exc), "trace_id": trace_id},
            )
        finally:
            sess.run_lock.release()
        payload = turn_payload(sess, answer)
        log({"record": "turn", "session": sess.state.session_id,
             "action": action, "kind": payload.get("kind"),
             "trace_id": payload["trace_id"]})
        return payload

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody | None = None):
        overrides = body.config if body is not None and body.config else {}
        try:
            config = defaults.with_overrides(overrides)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        sess = ApiSession(config)

        def forward(event: dict, sess: ApiSession = sess) -> None:
            stored = sess.publish(event)
            log({"record": "stage-event", **stored})

        sess.state.subscribe(forward)
        with sessions_lock:
            sessions[sess.state.session_id] = sess
        log({"record": "session-created", "session": sess.state.session_id,
             "config": sess.config.as_dict()})
        return {
            "session_id": sess.state.session_id,
            "created_at": sess.created_at,
            "config": sess.config.as_dict(),
        }

    @app.get("/sessions/{session_id}")
    def session_view(session_id: str):
        sess = get_session(session_id)
        state = sess.state
        pending_clar = None
        if state.pending_clarification is not None:
            pending_clar = state.pending_clarification.as_dict()
            pending_clar["kind"] = "clarification"
        pending_sel = None
        if state.pending_selection is not None:
            pending_sel = state.pending_selection.as_dict()
        return {
            "session_id": session_id,
            "created_at": sess.created_at,
            "config": sess.config.as_dict(),
            "questions": [
                _question_summary(i, q) for i, q in enumerate(state.questions)
            ],
            "pending_clarification": pending_clar,
            "pending_selection": pending_sel,
            "busy": sess.run_lock.locked(),
        }

    @app.post("/sessions/{session_id}/query")
    def post_query(session_id: str, body: TurnBody):
        sess = get_session(session_id)
        text = body.text.strip()
        if not text:
            raise HTTPException(status_code=422, detail="query text must not be empty")
        return run_turn(sess, "query",
                        lambda: run_discovery(sess.state, env, sess.config, text))

    @app.post("/sessions/{session_id}/clarify")
    def post_clarify(session_id: str, body: TurnBody):
        sess = get_session(session_id)
        text = body.text.strip()
        if not text:
            raise HTTPException(status_code=422, detail="clarification text must not be empty")
        return run_turn(sess, "clarify",
                        lambda: handle_clarification(sess.state, env, sess.config, text))

    @app.post("/sessions/{session_id}/select-entities")
    def post_selection(session_id: str, body: SelectBody):
        sess = get_session(session_id)
        return run_turn(sess, "select-entities",
                        lambda: handle_entity_selection(sess.state, env, sess.config,
                                                        body.keep))

    @app.get("/sessions/{session_id}/trace")
    def session_trace(session_id: str):
        sess = get_session(session_id)
        with sess.events_lock:
            events = list(sess.events)
        return {"session": session_id, "events": events}

    @app.get("/sessions/{session_id}/events")
    def session_events(
        session_id: str,
        after: int = 0,
        follow: bool = False,
        timeout: float | None = None,
        format: str = "ndjson",
    ):
        sess = get_session(session_id)
        if format not in ("ndjson", "sse"):
            raise HTTPException(status_code=422, detail=f"unknown stream format {format!r}")
        media = "text/event-stream" if format == "sse" else "application/x-ndjson"
        return StreamingResponse(
            _event_stream(sess, after, follow, timeout, format),
            media_type=media,
            headers={"Cache-Control": "no-cache"},
        )

    @app.get("/datasets/{dataset_id:path}/subgraph")
    def dataset_subgraph(dataset_id: str):
        try:
            return _subgraph_payload(store, dataset_id)
        except UnknownDataset as exc:
            raise HTTPException(status_code=404, detail=f"unknown dataset {exc}")

    @app.get("/datasets/{dataset_id:path}")
    def dataset_detail(dataset_id: str):
        try:
            return _dataset_payload(store, dataset_id)
        except UnknownDataset as exc:
            raise HTTPException(status_code=404, detail=f"unknown dataset {exc}")

    return app


def _frame(event: dict, fmt: str) -> str:
    line = json.dumps(event, separators=(",", ":"), default=str)
    if fmt == "sse":
        return f"data: {line}\n\n"
    return line + "\n"


def _keepalive(fmt: str) -> str:
    return ": keep-alive\n\n" if fmt == "sse" else "\n"


def _event_stream(
    sess: ApiSession,
    after: int,
    follow: bool,
    timeout: float | None,
    fmt: str,
) -> Iterator[str]:
    sub: queue.SimpleQueue | None = None
    with sess.events_lock:
        backlog = list(sess.events[max(after, 0):])
        if follow:
            sub = queue.SimpleQueue()
            sess.subscribers.append(sub)
    try:
        for event in backlog:
            yield _frame(event, fmt)
        if sub is None:
            return
        deadline = time.monotonic() + timeout if timeout is not None else None
        while True:
            wait = HEARTBEAT_SECONDS
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return
                wait = min(wait, remaining)
            try:
                event = sub.get(timeout=wait)
            except queue.Empty:
                if deadline is None:
                    yield _keepalive(fmt)
                continue
            yield _frame(event, fmt)
    finally:
        if sub is not None:
            with sess.events_lock:
                if sub in sess.subscribers:
                    sess.subscribers.remove(sub)

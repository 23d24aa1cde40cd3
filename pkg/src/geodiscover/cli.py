"""Command line front end: harvest, build, enrich, index, serve, query, eval.

The serve and query commands read one YAML file describing the deployment:

    snapshot: graph.snap
    providers:
      llm_script: script.json   # optional; omitted -> rule-based extraction only
      gazetteer: gaz.json       # optional; omitted -> bundled gazetteer
    pipeline:                   # optional PipelineConfig overrides
      confidence_threshold: 0.7
    service:                    # optional, serve only
      session_log: sessions.jsonl
      token: s3cr3t             # else GEODISCOVER_API_TOKEN applies
"""
from __future__ import annotations

import argparse
import json
import socket
import sys
from datetime import datetime, timezone
from pathlib import Path

import yaml

from .errors import GeodiscoverError
from .evaluation import (
    evaluate,
    load_intents,
    load_qrels,
    load_queries,
    load_runs,
    render_table,
    write_report,
)
from .graph.build import (
    deduplicate_topics,
    embed_attribute_entities,
    enrich_spacetime,
    generate_topics,
)
from .graph.snapshot import load_snapshot, save_snapshot
from .graph.store import GraphStore
from .harvest import harvest_catalog, load_sources
from .pipeline import PipelineConfig, PipelineEnv, SessionState, run_discovery
from .providers.embedding import HashingEmbedder
from .providers.geocoding import Gazetteer
from .providers.llm import ScriptedLlm


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _load_llm(path: str | None) -> ScriptedLlm:
    return ScriptedLlm.from_json(path) if path else ScriptedLlm([])


def _load_gazetteer(path: str | None) -> Gazetteer:
    return Gazetteer.from_json(path) if path else Gazetteer.bundled()


def _load_app_config(path: str) -> dict:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict) or "snapshot" not in raw:
        raise GeodiscoverError(f"{path}: expected a mapping with a 'snapshot' key")
    return raw


def _load_runtime(path: str):
    """Snapshot + providers + pipeline config, as the serve/query commands see them."""
    raw = _load_app_config(path)
    base = Path(path).parent
    store = load_snapshot(base / raw["snapshot"])
    store.ensure_indexes()
    providers = raw.get("providers") or {}
    llm_script = providers.get("llm_script")
    gazetteer = providers.get("gazetteer")
    llm = _load_llm(str(base / llm_script) if llm_script else None)
    geocoder = _load_gazetteer(str(base / gazetteer) if gazetteer else None)
    embedder = HashingEmbedder(store.dimension)
    config = PipelineConfig().with_overrides(raw.get("pipeline") or {})
    return store, llm, embedder, geocoder, config, raw.get("service") or {}


def cmd_harvest(args: argparse.Namespace) -> int:
    sources = load_sources(args.sources)
    if not sources:
        return _fail(f"{args.sources}: no sources defined")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for cfg in sources:
        records = []
        replay = None
        if args.replay:
            # Captures are usually bucketed per source; accept a flat dir too.
            nested = Path(args.replay) / cfg.source_id
            replay = nested if (nested / "manifest.json").is_file() else Path(args.replay)
        report = harvest_catalog(cfg, records.append, replay_dir=replay)
        staged = out / f"{cfg.source_id}.jsonl"
        with open(staged, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.as_dict(), separators=(",", ":")) + "\n")
        for line in report.lines():
            print(line)
        print(f"  staged -> {staged}")
        failures += len(report.parse_failures)
    return 0 if failures == 0 else 1


def cmd_build(args: argparse.Namespace) -> int:
    from .records import NormalizedRecord

    staged = sorted(Path(args.staging).glob("*.jsonl"))
    if not staged:
        return _fail(f"{args.staging}: no staged .jsonl files")
    if args.build_timestamp:
        stamp = datetime.fromisoformat(args.build_timestamp)
        if stamp.tzinfo is None:
            stamp = stamp.replace(tzinfo=timezone.utc)
    else:
        stamp = datetime.now(timezone.utc)

    store = GraphStore(dimension=args.dimension, build_timestamp=stamp)
    count = 0
    for path in staged:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    store.ingest_record(NormalizedRecord.from_dict(json.loads(line)))
                    count += 1

    llm = _load_llm(args.llm_script)
    embedder = HashingEmbedder(args.dimension)
    topic_report = generate_topics(store, store.dataset_ids(), llm, embedder)
    merge_report = deduplicate_topics(store)
    embed_attribute_entities(store, embedder)
    store.check_integrity()
    save_snapshot(store, args.out)
    print(f"ingested {count} records into {len(store.entities)} entities")
    print(f"topics: {len(topic_report.generated)} datasets labeled, "
          f"{len(topic_report.skipped)} skipped, "
          f"{merge_report.absorbed_count()} labels merged")
    print(f"snapshot -> {args.out}")
    return 0


def cmd_enrich(args: argparse.Namespace) -> int:
    store = load_snapshot(args.snapshot)
    llm = _load_llm(args.llm_script)
    geocoder = _load_gazetteer(args.gazetteer)
    report = enrich_spacetime(store, llm, geocoder)
    embed_attribute_entities(store, HashingEmbedder(store.dimension))
    out = args.out or args.snapshot
    save_snapshot(store, out)
    print(f"examined {report.examined}: +{len(report.space_added)} space, "
          f"+{len(report.time_added)} time, {len(report.unresolved)} unresolved, "
          f"{len(report.failures)} failures")
    print(f"snapshot -> {out}")
    return 0


def cmd_index(args: argparse.Namespace) -> int:
    store = load_snapshot(args.snapshot)
    manifest = store.build_indexes()
    out = args.out or args.snapshot
    save_snapshot(store, out)
    print(json.dumps(manifest, sort_keys=True))
    print(f"snapshot -> {out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    store, llm, embedder, geocoder, config, service_cfg = _load_runtime(args.config)
    app = create_app(
        store, llm, embedder, geocoder,
        default_config=config,
        session_log=service_cfg.get("session_log"),
        api_token=service_cfg.get("token"),
    )
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((args.host, args.port))
    host, port = sock.getsockname()[:2]
    print(f"listening on http://{host}:{port}", flush=True)
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning"))
    server.run(sockets=[sock])
    return 0


def _print_results(payload: dict) -> None:
    print(payload.get("summary", ""))
    for row in payload.get("results", []):
        print(f"{row['position']:>3}. {row['title']}  "
              f"[{row['normalized']:.4f}]  {row['dataset_id']}")
        for line in row.get("rationale", []):
            print(f"     - {line}")


def cmd_query(args: argparse.Namespace) -> int:
    store, llm, embedder, geocoder, config, _ = _load_runtime(args.config)
    env = PipelineEnv(store=store, llm=llm, embedder=embedder, geocoder=geocoder)
    session = SessionState()
    answer = run_discovery(session, env, config, args.text)
    payload = answer.as_dict()
    kind = payload.get("kind", "clarification" if "reason" in payload else "results")
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    elif kind == "results":
        _print_results(payload)
    elif kind == "general":
        print(payload["text"])
    else:
        print(f"needs user input ({kind}): "
              f"{payload.get('question') or payload.get('dimensions')}", file=sys.stderr)
    return 0 if kind in ("results", "general") else 2


def cmd_eval(args: argparse.Namespace) -> int:
    queries = load_queries(args.queries)
    judgments = load_qrels(args.qrels)
    runs = load_runs(args.runs)
    intents = load_intents(args.intents) if args.intents else None
    reports = evaluate(queries, judgments, runs, intents=intents)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = write_report(reports, out, stem=args.stem)
    for report in reports:
        print(render_table(report))
    print(f"report files: {', '.join(str(p) for ps in written.values() for p in ps)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geodiscover")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("harvest", help="pull catalogs into a staging directory")
    p.add_argument("--sources", required=True, help="sources YAML")
    p.add_argument("--out", required=True, help="staging directory")
    p.add_argument("--replay", help="serve responses from a capture directory")
    p.set_defaults(fn=cmd_harvest)

    p = sub.add_parser("build", help="build a graph snapshot from staged records")
    p.add_argument("--staging", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--llm-script", help="scripted LLM JSON for topic generation")
    p.add_argument("--dimension", type=int, default=HashingEmbedder().dimension)
    p.add_argument("--build-timestamp",
                   help="ISO instant used to clamp open time intervals (default: now)")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("enrich", help="fill missing space/time from provenance")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--out", help="default: rewrite --snapshot in place")
    p.add_argument("--llm-script")
    p.add_argument("--gazetteer")
    p.set_defaults(fn=cmd_enrich)

    p = sub.add_parser("index", help="build retrieval indexes and restamp the snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000,
                   help="0 binds an ephemeral port and prints it")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("query", help="run one question end to end and print results")
    p.add_argument("--config", required=True)
    p.add_argument("text")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("eval", help="score ranked runs and write report files")
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--runs", required=True)
    p.add_argument("--intents")
    p.add_argument("--out", required=True)
    p.add_argument("--stem", default="report")
    p.set_defaults(fn=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except GeodiscoverError as exc:
        return _fail(str(exc))
    except (OSError, ValueError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())

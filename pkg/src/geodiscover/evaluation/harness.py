"""Benchmark file formats and the query-by-query evaluation loop.

File layouts (one JSON object per line):
  queries    {"id", "text", "level", "gold": {dimension: value}}
  judgments  {"query", "dataset", "grade"}
  runs       {"query", "rank", "dataset", "system"}
  intents    {"query", "constraints": {dimension: value}}   (optional)

Space values are [west, south, east, north]; time values are
[begin, end] ISO-8601 strings with null for an open end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from ..errors import MissingJudgments
from ..geometry import BBox, TimeInterval
from .metrics import MatchRules, dcg_at, eimr, ideal_dcg_at, ndcg_at, recall_at

_TEXT_DIMENSIONS = ("topic", "organization", "format", "license")
_LEVEL_RANGE = (1, 2, 3, 4)


def _parse_constraints(raw: dict, where: str) -> dict:
    constraints: dict = {}
    for dimension, value in raw.items():
        if dimension in _TEXT_DIMENSIONS:
            constraints[dimension] = str(value)
        elif dimension == "space":
            west, south, east, north = value
            constraints["space"] = BBox(west, south, east, north)
        elif dimension == "time":
            begin, end = value
            constraints["time"] = TimeInterval(
                begin=datetime.fromisoformat(begin),
                end=datetime.fromisoformat(end) if end is not None else None,
            )
        else:
            raise ValueError(f"{where}: unknown constraint dimension {dimension!r}")
    return constraints


@dataclass(frozen=True)
class TestQuery:
    """A benchmark query with its gold constraint set."""

    query_id: str
    text: str
    level: int
    gold: dict

    def __post_init__(self) -> None:
        if self.level not in _LEVEL_RANGE:
            raise ValueError(f"query {self.query_id}: level must be 1-4")
        stated = set(self.gold)
        core = {"topic", "space", "time"}
        supplementary = stated - core
        ok = {
            1: stated == {"topic"},
            2: stated in ({"topic", "space"}, {"topic", "time"}),
            3: stated == core,
            4: core <= stated and bool(supplementary),
        }[self.level]
        if not ok:
            raise ValueError(
                f"query {self.query_id}: constraints {sorted(stated)} do not "
                f"fit level {self.level}"
            )


@dataclass(frozen=True)
class RelevanceJudgment:
    query_id: str
    dataset_id: str
    grade: int

    def __post_init__(self) -> None:
        if self.grade not in (0, 1, 2, 3):
            raise ValueError(f"grade must be 0-3, got {self.grade}")


@dataclass(frozen=True)
class RunResult:
    query_id: str
    system: str
    ranked: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.ranked)) != len(self.ranked):
            raise ValueError(
                f"run {self.system}/{self.query_id} contains duplicate dataset ids"
            )


@dataclass(frozen=True)
class QueryMetrics:
    query_id: str
    level: int
    dcg: float
    idcg: float
    ndcg: float
    recall: float | None
    eimr: float | None

    def as_dict(self) -> dict:
        return {
            "query": self.query_id,
            "level": self.level,
            "dcg": self.dcg,
            "idcg": self.idcg,
            "ndcg": self.ndcg,
            "recall": self.recall,
            "eimr": self.eimr,
        }


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


@dataclass(frozen=True)
class LevelSummary:
    label: str
    query_count: int
    mean_dcg: float | None
    mean_idcg: float | None
    mean_ndcg: float | None
    mean_recall: float | None
    mean_eimr: float | None

    @classmethod
    def over(cls, label: str, rows: list[QueryMetrics]) -> "LevelSummary":
        return cls(
            label=label,
            query_count=len(rows),
            mean_dcg=_mean([r.dcg for r in rows]),
            mean_idcg=_mean([r.idcg for r in rows]),
            mean_ndcg=_mean([r.ndcg for r in rows]),
            mean_recall=_mean([r.recall for r in rows if r.recall is not None]),
            mean_eimr=_mean([r.eimr for r in rows if r.eimr is not None]),
        )

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "queries": self.query_count,
            "dcg": self.mean_dcg,
            "idcg": self.mean_idcg,
            "ndcg": self.mean_ndcg,
            "recall": self.mean_recall,
            "eimr": self.mean_eimr,
        }


@dataclass(frozen=True)
class MetricReport:
    """All metrics for one system over the benchmark."""

    system: str
    per_query: tuple[QueryMetrics, ...]
    levels: dict[str, LevelSummary]
    overall: LevelSummary
    missing_judgments: tuple[str, ...] = ()
    recall_skipped: tuple[str, ...] = ()
    eimr_missing: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "system": self.system,
            "overall": self.overall.as_dict(),
            "levels": {label: s.as_dict() for label, s in sorted(self.levels.items())},
            "per_query": [m.as_dict() for m in self.per_query],
            "flags": {
                "missing_judgments": list(self.missing_judgments),
                "recall_skipped": list(self.recall_skipped),
                "eimr_missing": list(self.eimr_missing),
            },
        }


def _read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    return rows


def load_queries(path: str | Path) -> list[TestQuery]:
    queries = []
    seen: set[str] = set()
    for row in _read_jsonl(path):
        qid = str(row["id"])
        if qid in seen:
            raise ValueError(f"duplicate query id {qid!r}")
        seen.add(qid)
        queries.append(
            TestQuery(
                query_id=qid,
                text=str(row["text"]),
                level=int(row["level"]),
                gold=_parse_constraints(row["gold"], f"query {qid}"),
            )
        )
    return queries


def load_qrels(path: str | Path) -> list[RelevanceJudgment]:
    judgments = []
    seen: set[tuple[str, str]] = set()
    for row in _read_jsonl(path):
        key = (str(row["query"]), str(row["dataset"]))
        if key in seen:
            raise ValueError(f"duplicate judgment for {key}")
        seen.add(key)
        judgments.append(RelevanceJudgment(key[0], key[1], int(row["grade"])))
    return judgments


def load_runs(path: str | Path) -> list[RunResult]:
    grouped: dict[tuple[str, str], list[tuple[int, str]]] = {}
    for row in _read_jsonl(path):
        key = (str(row["system"]), str(row["query"]))
        grouped.setdefault(key, []).append((int(row["rank"]), str(row["dataset"])))
    results = []
    for (system, qid), pairs in sorted(grouped.items()):
        ranks = [rank for rank, _ in pairs]
        if len(set(ranks)) != len(ranks):
            raise ValueError(f"run {system}/{qid} repeats a rank")
        ranked = tuple(did for _, did in sorted(pairs))
        results.append(RunResult(query_id=qid, system=system, ranked=ranked))
    return results


def load_intents(path: str | Path) -> dict[str, dict]:
    intents: dict[str, dict] = {}
    for row in _read_jsonl(path):
        qid = str(row["query"])
        if qid in intents:
            raise ValueError(f"duplicate intent for query {qid!r}")
        intents[qid] = _parse_constraints(row["constraints"], f"intent {qid}")
    return intents


def evaluate(
    queries: list[TestQuery],
    judgments: list[RelevanceJudgment],
    runs: list[RunResult],
    intents: dict[str, dict] | None = None,
    rules: MatchRules = MatchRules(),
    ndcg_k: int = 10,
    recall_k: int = 20,
) -> list[MetricReport]:
    """Score every system found in the run set, one report each.

    Queries with no judgments at all are excluded and flagged; queries
    whose pool has no relevant item are excluded from recall means only.
    EIMR stays null for queries absent from the intents mapping.
    """
    judged: dict[str, dict[str, int]] = {}
    for j in judgments:
        judged.setdefault(j.query_id, {})[j.dataset_id] = j.grade

    by_system: dict[str, dict[str, RunResult]] = {}
    for run in runs:
        by_system.setdefault(run.system, {})[run.query_id] = run

    reports = []
    for system in sorted(by_system):
        system_runs = by_system[system]
        rows: list[QueryMetrics] = []
        missing: list[str] = []
        recall_skipped: list[str] = []
        eimr_missing: list[str] = []
        for query in queries:
            qid = query.query_id
            query_judged = judged.get(qid)
            if query_judged is None:
                missing.append(qid)
                continue
            run = system_runs.get(qid)
            ranked = list(run.ranked) if run is not None else []
            grades = [query_judged.get(did, 0) for did in ranked]
            dcg = dcg_at(grades, ndcg_k)
            idcg = ideal_dcg_at(list(query_judged.values()), ndcg_k)
            ndcg = ndcg_at(ranked, query_judged, ndcg_k)
            recall = recall_at(ranked, query_judged, recall_k)
            if recall is None:
                recall_skipped.append(qid)
            match_rate = None
            if intents is not None:
                predicted = intents.get(qid)
                if predicted is None:
                    eimr_missing.append(qid)
                else:
                    match_rate = eimr(query.gold, predicted, rules)
            rows.append(
                QueryMetrics(
                    query_id=qid,
                    level=query.level,
                    dcg=dcg,
                    idcg=idcg,
                    ndcg=ndcg,
                    recall=recall,
                    eimr=match_rate,
                )
            )
        if not rows:
            raise MissingJudgments(
                f"system {system!r}: no query has both runs and judgments"
            )
        levels = {
            str(level): LevelSummary.over(
                str(level), [r for r in rows if r.level == level]
            )
            for level in _LEVEL_RANGE
        }
        reports.append(
            MetricReport(
                system=system,
                per_query=tuple(rows),
                levels=levels,
                overall=LevelSummary.over("overall", rows),
                missing_judgments=tuple(missing),
                recall_skipped=tuple(recall_skipped),
                eimr_missing=tuple(eimr_missing),
            )
        )
    return reports

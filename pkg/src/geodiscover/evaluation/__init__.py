"""Benchmark machinery: extraction match rate, graded ranking metrics, reports."""

from .harness import (
    MetricReport,
    QueryMetrics,
    RelevanceJudgment,
    RunResult,
    TestQuery,
    evaluate,
    load_intents,
    load_qrels,
    load_queries,
    load_runs,
)
from .metrics import (
    MatchRules,
    dcg_at,
    eimr,
    intervals_match,
    ndcg_at,
    pool_runs,
    boxes_match,
    recall_at,
    texts_match,
)
from .report import render_table, write_report

__all__ = [
    "MatchRules",
    "MetricReport",
    "QueryMetrics",
    "RelevanceJudgment",
    "RunResult",
    "TestQuery",
    "boxes_match",
    "dcg_at",
    "eimr",
    "evaluate",
    "intervals_match",
    "load_intents",
    "load_qrels",
    "load_queries",
    "load_runs",
    "ndcg_at",
    "pool_runs",
    "recall_at",
    "render_table",
    "texts_match",
    "write_report",
]

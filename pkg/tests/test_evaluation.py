"""Benchmark metrics, file loaders, evaluation loop, and report output."""

from __future__ import annotations

import json
import math
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from geodiscover.errors import EmptyGold, MissingJudgments
from geodiscover.evaluation.harness import (
    LevelSummary,
    MetricReport,
    QueryMetrics,
    RelevanceJudgment,
    RunResult,
    TestQuery as BenchQuery,
    evaluate,
    load_intents,
    load_qrels,
    load_queries,
    load_runs,
)
from geodiscover.evaluation.metrics import (
    MatchRules,
    boxes_match,
    dcg_at,
    eimr,
    ideal_dcg_at,
    intervals_match,
    ndcg_at,
    pool_runs,
    recall_at,
    texts_match,
)
from geodiscover.evaluation.report import render_table, write_report
from geodiscover.geometry import BBox, TimeInterval


def utc(*args) -> datetime:
    return datetime(*args, tzinfo=timezone.utc)


def test_texts_match_normalizes():
    assert texts_match("  Daily   Temperature ", "daily temperature")
    assert not texts_match("daily temperature", "monthly temperature")


def test_boxes_match_iou_boundary():
    gold = BBox(0, 0, 10, 10)
    # intersection 90, union 100: exactly at the 0.9 threshold
    assert boxes_match(BBox(0, 0, 10, 9), gold)
    assert not boxes_match(BBox(0, 0, 10, 8.9), gold)
    assert boxes_match(gold, gold)


def test_boxes_match_zero_union_requires_equality():
    point = BBox(5, 5, 5, 5)
    assert boxes_match(point, BBox(5, 5, 5, 5))
    assert not boxes_match(point, BBox(6, 6, 6, 6))


def test_intervals_match_slack_and_openness():
    gold = TimeInterval(utc(2000, 1, 1), utc(2010, 1, 1))
    shifted = TimeInterval(utc(2000, 1, 2), utc(2010, 1, 1))
    assert intervals_match(shifted, gold)  # exactly 86400 s off
    late = TimeInterval(utc(2000, 1, 2, 0, 0, 1), utc(2010, 1, 1))
    assert not intervals_match(late, gold)

    open_gold = TimeInterval(utc(2000, 1, 1), None)
    assert intervals_match(TimeInterval(utc(2000, 1, 1, 12), None), open_gold)
    # openness must agree in both directions
    assert not intervals_match(gold, open_gold)
    assert not intervals_match(open_gold, gold)


def test_eimr_is_gold_denominated():
    gold = {
        "topic": "temperature",
        "space": BBox(0, 0, 10, 10),
        "time": TimeInterval(utc(2000, 1, 1), utc(2010, 1, 1)),
    }
    predicted = {
        "topic": "Temperature",
        "space": BBox(0, 0, 10, 9),
        "time": TimeInterval(utc(1980, 1, 1), utc(2010, 1, 1)),
        "format": "NetCDF",  # extra dimension never penalizes
    }
    assert eimr(gold, predicted) == pytest.approx(2 / 3)
    assert eimr(gold, {}) == 0.0
    with pytest.raises(EmptyGold):
        eimr({}, predicted)


def test_eimr_respects_custom_rules():
    gold = {"space": BBox(0, 0, 10, 10)}
    predicted = {"space": BBox(0, 0, 10, 8)}
    assert eimr(gold, predicted) == 0.0
    assert eimr(gold, predicted, MatchRules(bbox_iou=0.75)) == 1.0


def test_dcg_hand_values():
    assert dcg_at([2, 3], 10) == pytest.approx(3.8927892607143724, abs=1e-15)
    assert dcg_at([3, 2], 10) == pytest.approx(3 + 2 / math.log2(3), abs=1e-15)
    assert dcg_at([1, 1, 1], 2) == pytest.approx(1 + 1 / math.log2(3), abs=1e-15)
    assert dcg_at([], 10) == 0.0
    with pytest.raises(ValueError):
        dcg_at([1], 0)


def test_ideal_dcg_sorts_judged_grades():
    assert ideal_dcg_at([2, 3], 10) == pytest.approx(dcg_at([3, 2], 10), abs=1e-15)


def test_ndcg_spot_value():
    judged = {"a": 3, "b": 2}
    assert ndcg_at(["b", "a"], judged, 10) == pytest.approx(
        0.9134015924715543, abs=1e-15
    )
    assert ndcg_at(["a", "b"], judged, 10) == 1.0


def test_ndcg_conventions():
    # retrieved but unjudged counts as grade zero
    judged = {"a": 2}
    assert ndcg_at(["x", "a"], judged, 10) == pytest.approx(
        (2 / math.log2(3)) / 2.0, abs=1e-15
    )
    # the ideal draws on judged items the run never retrieved
    assert ndcg_at(["a"], {"a": 1, "b": 3}, 10) == pytest.approx(
        1.0 / dcg_at([3, 1], 10), abs=1e-15
    )
    # all-zero judgments score 0 by the 0/0 convention
    assert ndcg_at(["a"], {"a": 0}, 10) == 0.0


def test_recall_at():
    judged = {"a": 2, "b": 1, "c": 0}
    assert recall_at(["a", "c"], judged, 20) == pytest.approx(0.5)
    assert recall_at(["a", "b"], judged, 1) == pytest.approx(0.5)
    assert recall_at([], judged, 20) == 0.0
    assert recall_at(["a"], {"c": 0}, 20) is None


def test_pool_runs():
    assert pool_runs([["b", "a"], ["c", "a"]]) == ["a", "b", "c"]


@given(st.lists(st.integers(min_value=0, max_value=3), min_size=1, max_size=12)
       .flatmap(lambda g: st.permutations(g).map(lambda p: (g, list(p)))))
def test_sorted_grades_maximize_dcg(pair):
    grades, shuffled = pair
    assert dcg_at(sorted(grades, reverse=True), 10) >= dcg_at(shuffled, 10) - 1e-12


@given(
    st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=8, unique=True),
    st.dictionaries(st.sampled_from("abcdefgh"),
                    st.integers(min_value=0, max_value=3), min_size=1),
    st.integers(min_value=1, max_value=8),
    st.integers(min_value=0, max_value=8),
)
def test_recall_is_monotone_in_k(run, judged, k, extra):
    first = recall_at(run, judged, k)
    second = recall_at(run, judged, k + extra)
    if first is None:
        assert second is None
    else:
        assert second >= first


@given(
    st.dictionaries(st.sampled_from(["topic", "organization", "format"]),
                    st.text(min_size=1, max_size=8), min_size=1),
    st.text(min_size=1, max_size=8),
)
def test_eimr_ignores_extra_predicted_dimensions(gold, noise):
    predicted = dict(gold)
    base = eimr(gold, predicted)
    predicted["license"] = noise
    assert eimr(gold, predicted) == base


def test_query_level_rules():
    BenchQuery("q1", "t", 1, {"topic": "x"})
    BenchQuery("q2", "t", 2, {"topic": "x", "space": BBox(0, 0, 1, 1)})
    BenchQuery("q2b", "t", 2,
              {"topic": "x", "time": TimeInterval(utc(2000, 1, 1), None)})
    BenchQuery("q3", "t", 3, {"topic": "x", "space": BBox(0, 0, 1, 1),
                             "time": TimeInterval(utc(2000, 1, 1), None)})
    BenchQuery("q4", "t", 4, {"topic": "x", "space": BBox(0, 0, 1, 1),
                             "time": TimeInterval(utc(2000, 1, 1), None),
                             "format": "NetCDF"})
    with pytest.raises(ValueError):
        BenchQuery("bad", "t", 1, {"topic": "x", "format": "NetCDF"})
    with pytest.raises(ValueError):
        BenchQuery("bad", "t", 4, {"topic": "x", "space": BBox(0, 0, 1, 1),
                                  "time": TimeInterval(utc(2000, 1, 1), None)})
    with pytest.raises(ValueError):
        BenchQuery("bad", "t", 5, {"topic": "x"})


def test_judgment_and_run_validation():
    with pytest.raises(ValueError):
        RelevanceJudgment("q", "d", 4)
    with pytest.raises(ValueError):
        RunResult("q", "s", ("d1", "d1"))


def _write(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")


def test_loaders_round_trip(tmp_path):
    _write(tmp_path / "queries.jsonl", [
        {"id": "q1", "text": "temperature", "level": 1, "gold": {"topic": "temperature"}},
        {"id": "q2", "text": "rain in a box", "level": 2,
         "gold": {"topic": "rain", "space": [0, 0, 10, 10]}},
        {"id": "q3", "text": "rain since 2000", "level": 2,
         "gold": {"topic": "rain", "time": ["2000-01-01T00:00:00+00:00", None]}},
    ])
    queries = load_queries(tmp_path / "queries.jsonl")
    assert [q.query_id for q in queries] == ["q1", "q2", "q3"]
    assert queries[1].gold["space"] == BBox(0, 0, 10, 10)
    assert queries[2].gold["time"].is_open

    _write(tmp_path / "qrels.jsonl", [
        {"query": "q1", "dataset": "d1", "grade": 2},
        {"query": "q1", "dataset": "d2", "grade": 0},
    ])
    qrels = load_qrels(tmp_path / "qrels.jsonl")
    assert [(j.dataset_id, j.grade) for j in qrels] == [("d1", 2), ("d2", 0)]

    # ranks arrive out of order and are sorted per (system, query)
    _write(tmp_path / "runs.jsonl", [
        {"query": "q1", "rank": 2, "dataset": "d2", "system": "graph"},
        {"query": "q1", "rank": 1, "dataset": "d1", "system": "graph"},
    ])
    runs = load_runs(tmp_path / "runs.jsonl")
    assert runs[0].ranked == ("d1", "d2")

    _write(tmp_path / "intents.jsonl", [
        {"query": "q1", "constraints": {"topic": "temperature"}},
    ])
    intents = load_intents(tmp_path / "intents.jsonl")
    assert intents["q1"] == {"topic": "temperature"}


def test_loader_rejections(tmp_path):
    _write(tmp_path / "dup_q.jsonl", [
        {"id": "q1", "text": "t", "level": 1, "gold": {"topic": "x"}},
        {"id": "q1", "text": "t", "level": 1, "gold": {"topic": "x"}},
    ])
    with pytest.raises(ValueError, match="duplicate query id"):
        load_queries(tmp_path / "dup_q.jsonl")

    _write(tmp_path / "dup_j.jsonl", [
        {"query": "q1", "dataset": "d1", "grade": 1},
        {"query": "q1", "dataset": "d1", "grade": 2},
    ])
    with pytest.raises(ValueError, match="duplicate judgment"):
        load_qrels(tmp_path / "dup_j.jsonl")

    _write(tmp_path / "dup_rank.jsonl", [
        {"query": "q1", "rank": 1, "dataset": "d1", "system": "graph"},
        {"query": "q1", "rank": 1, "dataset": "d2", "system": "graph"},
    ])
    with pytest.raises(ValueError, match="repeats a rank"):
        load_runs(tmp_path / "dup_rank.jsonl")

    _write(tmp_path / "dup_i.jsonl", [
        {"query": "q1", "constraints": {"topic": "x"}},
        {"query": "q1", "constraints": {"topic": "y"}},
    ])
    with pytest.raises(ValueError, match="duplicate intent"):
        load_intents(tmp_path / "dup_i.jsonl")

    _write(tmp_path / "bad_dim.jsonl", [
        {"id": "q1", "text": "t", "level": 1, "gold": {"vibes": "x"}},
    ])
    with pytest.raises(ValueError, match="unknown constraint dimension"):
        load_queries(tmp_path / "bad_dim.jsonl")

    (tmp_path / "broken.jsonl").write_text('{"id": \n', encoding="utf-8")
    with pytest.raises(ValueError, match="broken.jsonl:1"):
        load_queries(tmp_path / "broken.jsonl")


def _bench():
    queries = [
        BenchQuery("q1", "temperature", 1, {"topic": "temperature"}),
        BenchQuery("q2", "unjudged", 1, {"topic": "x"}),
        BenchQuery("q3", "all irrelevant", 1, {"topic": "y"}),
    ]
    judgments = [
        RelevanceJudgment("q1", "d1", 3),
        RelevanceJudgment("q1", "d2", 2),
        RelevanceJudgment("q3", "d9", 0),
    ]
    runs = [
        RunResult("q1", "graph", ("d2", "d1")),
        RunResult("q3", "graph", ("d9",)),
    ]
    intents = {"q1": {"topic": "temperature"}}
    return queries, judgments, runs, intents


def test_evaluate_flags_and_means():
    queries, judgments, runs, intents = _bench()
    (report,) = evaluate(queries, judgments, runs, intents)

    assert report.system == "graph"
    assert report.missing_judgments == ("q2",)
    assert report.recall_skipped == ("q3",)
    assert report.eimr_missing == ("q3",)

    rows = {r.query_id: r for r in report.per_query}
    assert set(rows) == {"q1", "q3"}
    assert rows["q1"].ndcg == pytest.approx(0.9134015924715543, abs=1e-15)
    assert rows["q1"].recall == pytest.approx(1.0)
    assert rows["q1"].eimr == pytest.approx(1.0)
    assert rows["q3"].ndcg == 0.0
    assert rows["q3"].recall is None
    assert rows["q3"].eimr is None

    # means skip None entries instead of treating them as zero
    assert report.overall.query_count == 2
    assert report.overall.mean_ndcg == pytest.approx(
        rows["q1"].ndcg / 2, abs=1e-15
    )
    assert report.overall.mean_recall == pytest.approx(1.0)
    assert report.overall.mean_eimr == pytest.approx(1.0)
    assert set(report.levels) == {"1", "2", "3", "4"}
    assert report.levels["1"].query_count == 2
    assert report.levels["2"].query_count == 0
    assert report.levels["2"].mean_ndcg is None


def test_evaluate_without_intents_leaves_eimr_null():
    queries, judgments, runs, _ = _bench()
    (report,) = evaluate(queries, judgments, runs, intents=None)
    assert report.eimr_missing == ()
    assert all(r.eimr is None for r in report.per_query)
    assert report.overall.mean_eimr is None


def test_evaluate_scores_each_system():
    queries, judgments, runs, intents = _bench()
    runs = runs + [RunResult("q1", "keyword-baseline", ("d1", "d2"))]
    reports = evaluate(queries, judgments, runs, intents)
    assert [r.system for r in reports] == ["graph", "keyword-baseline"]
    baseline = {r.query_id: r for r in reports[1].per_query}
    assert baseline["q1"].ndcg == 1.0
    # a system with no run for a judged query scores it as an empty ranking
    assert baseline["q3"].dcg == 0.0
    assert baseline["q3"].ndcg == 0.0


def test_evaluate_requires_some_judged_query():
    queries = [BenchQuery("q1", "t", 1, {"topic": "x"})]
    runs = [RunResult("q1", "graph", ("d1",))]
    with pytest.raises(MissingJudgments):
        evaluate(queries, [], runs)


def test_render_table_layout():
    queries, judgments, runs, intents = _bench()
    (report,) = evaluate(queries, judgments, runs, intents)
    table = render_table(report)
    lines = table.splitlines()
    assert lines[0] == "# system: graph"
    assert lines[1] == "Level\tQueries\tDCG@10\tIDCG@10\tNDCG@10\tRecall@20\tEIMR"
    level_one = lines[2].split("\t")
    assert level_one[0] == "1"
    assert level_one[1] == "2"
    assert level_one[4] == f"{report.levels['1'].mean_ndcg:.4f}"
    empty_level = lines[3].split("\t")
    assert empty_level == ["2", "0", "-", "-", "-", "-", "-"]
    assert lines[6].split("\t")[0] == "overall"
    assert lines[7] == "# excluded (no judgments): q2"
    assert lines[8] == "# recall skipped (no relevant): q3"
    assert lines[9] == "# eimr missing (no intent): q3"
    assert table.endswith("\n")


def test_write_report_outputs(tmp_path):
    queries, judgments, runs, intents = _bench()
    runs = runs + [RunResult("q1", "keyword-baseline", ("d1", "d2"))]
    reports = evaluate(queries, judgments, runs, intents)

    written = write_report(reports, tmp_path, stem="bench")
    json_path = tmp_path / "bench.json"
    tsv_path = tmp_path / "bench.tsv"
    assert written["json"] == [str(json_path)]
    assert written["table"] == [str(tsv_path)]
    assert written["figures"] == [
        str(tmp_path / "bench_graph.png"),
        str(tmp_path / "bench_keyword-baseline.png"),
    ]

    payload = json.loads(json_path.read_text(encoding="utf-8"))
    assert [s["system"] for s in payload["systems"]] == [
        "graph", "keyword-baseline",
    ]
    assert payload["systems"][0]["flags"]["missing_judgments"] == ["q2"]
    assert tsv_path.read_text(encoding="utf-8") == "\n".join(
        render_table(r) for r in reports
    )
    for figure in written["figures"]:
        with open(figure, "rb") as fh:
            assert fh.read(8) == b"\x89PNG\r\n\x1a\n"

    # a second write is byte-identical: nothing nondeterministic leaks in
    first = json_path.read_bytes()
    write_report(reports, tmp_path, stem="bench")
    assert json_path.read_bytes() == first


def test_summary_over_empty_rows():
    summary = LevelSummary.over("3", [])
    assert summary.query_count == 0
    assert summary.mean_ndcg is None
    assert summary.as_dict()["recall"] is None


def test_metric_report_as_dict_shape():
    row = QueryMetrics("q1", 1, 1.0, 1.0, 1.0, 0.5, None)
    report = MetricReport(
        system="graph",
        per_query=(row,),
        levels={"1": LevelSummary.over("1", [row])},
        overall=LevelSummary.over("overall", [row]),
    )
    payload = report.as_dict()
    assert payload["per_query"][0]["eimr"] is None
    assert payload["overall"]["queries"] == 1
    assert payload["flags"] == {
        "missing_judgments": [], "recall_skipped": [], "eimr_missing": [],
    }

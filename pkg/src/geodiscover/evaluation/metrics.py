"""Retrieval and extraction metrics over pooled graded judgments."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import EmptyGold
from ..geometry import BBox, TimeInterval, bbox_area, bbox_overlap_area


@dataclass(frozen=True)
class MatchRules:
    """Comparator thresholds for judging extracted constraints against gold."""

    bbox_iou: float = 0.9
    time_slack_seconds: float = 86400.0


def texts_match(predicted: str, gold: str) -> bool:
    """Case-insensitive equality after whitespace normalization."""
    return " ".join(predicted.split()).casefold() == " ".join(gold.split()).casefold()


def boxes_match(predicted: BBox, gold: BBox, rules: MatchRules = MatchRules()) -> bool:
    """Boxes agree when their intersection-over-union clears the threshold.

    Two identical zero-area boxes count as a match; otherwise a zero
    union means no agreement.
    """
    inter = bbox_overlap_area(predicted, gold)
    union = bbox_area(predicted) + bbox_area(gold) - inter
    if union == 0.0:
        return predicted == gold
    return inter / union >= rules.bbox_iou


def intervals_match(
    predicted: TimeInterval, gold: TimeInterval, rules: MatchRules = MatchRules()
) -> bool:
    """Intervals agree when both endpoints land within the slack window.

    Openness must agree: an open end only matches an open end.
    """
    if abs((predicted.begin - gold.begin).total_seconds()) > rules.time_slack_seconds:
        return False
    if predicted.is_open or gold.is_open:
        return predicted.is_open and gold.is_open
    return abs((predicted.end - gold.end).total_seconds()) <= rules.time_slack_seconds


def _constraint_matches(dimension: str, predicted, gold, rules: MatchRules) -> bool:
    if predicted is None:
        return False
    if dimension == "space":
        return boxes_match(predicted, gold, rules)
    if dimension == "time":
        return intervals_match(predicted, gold, rules)
    return texts_match(str(predicted), str(gold))


def eimr(gold: dict, predicted: dict, rules: MatchRules = MatchRules()) -> float:
    """Fraction of gold constraints the extraction got right.

    Extra predicted dimensions never penalize; the denominator is the
    gold constraint count alone.
    """
    if not gold:
        raise EmptyGold("query has no gold constraints")
    hit = sum(
        1
        for dimension, value in gold.items()
        if _constraint_matches(dimension, predicted.get(dimension), value, rules)
    )
    return hit / len(gold)


def dcg_at(grades, k: int) -> float:
    """Discounted cumulative gain over the first k grades."""
    if k < 1:
        raise ValueError("k must be at least 1")
    total = 0.0
    for i, grade in enumerate(grades[:k], start=1):
        total += grade / math.log2(i + 1)
    return total


def ideal_dcg_at(judged_grades, k: int) -> float:
    """Best achievable DCG: all judged grades sorted descending, cut at k."""
    return dcg_at(sorted(judged_grades, reverse=True), k)


def ndcg_at(run_ids, judged: dict[str, int], k: int = 10) -> float:
    """Normalized DCG of a ranked run against the query's judgments.

    Retrieved ids without a judgment count as grade 0. The ideal ranking
    draws on every judged item for the query, not just retrieved ones.
    An all-zero judgment set yields 0 by the 0/0 convention.
    """
    grades = [judged.get(did, 0) for did in run_ids]
    ideal = ideal_dcg_at(list(judged.values()), k)
    if ideal == 0.0:
        return 0.0
    return dcg_at(grades, k) / ideal


def recall_at(run_ids, judged: dict[str, int], k: int = 20) -> float | None:
    """Share of relevant items (grade > 0) found in the top k.

    Returns None when the pool holds no relevant item at all; the caller
    excludes such queries from aggregates rather than scoring them 0.
    """
    relevant = {did for did, grade in judged.items() if grade > 0}
    if not relevant:
        return None
    found = sum(1 for did in run_ids[:k] if did in relevant)
    return found / len(relevant)


def pool_runs(runs) -> list[str]:
    """Union of all retrieved ids across systems, id ascending."""
    pooled: set[str] = set()
    for ids in runs:
        pooled.update(ids)
    return sorted(pooled)

"""Answer assembly: rerank, summarize, and justify the retrieved datasets."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ProviderFailure, UnscriptedTask
from ..graph.store import GraphStore
from ..ontology import Subgraph
from ..providers.llm import LlmProvider, call_with_retries
from ..providers.tasks import AnswerSynthesis
from .config import PipelineConfig
from .intent import GeoIntent
from .retrieval import ScoredDataset

_DIMENSION_PHRASES = {
    "topic": "Topic match",
    "space": "Spatial coverage",
    "time": "Temporal coverage",
    "organization": "Provider match",
    "format": "Format match",
    "license": "License match",
}


@dataclass(frozen=True)
class SynthesisOutput:
    """The final answer for one question."""

    order: tuple[str, ...]
    summary: str
    rationales: dict[str, list[str]]
    degraded: bool = False
    subgraphs: dict[str, Subgraph] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "order": list(self.order),
            "summary": self.summary,
            "rationales": {k: list(v) for k, v in self.rationales.items()},
            "degraded": self.degraded,
            "subgraphs": sorted(self.subgraphs),
        }


def build_evidence(ranked: list[ScoredDataset]) -> tuple[dict, ...]:
    """Per-dataset evidence passed to the synthesis prompt."""
    rows = []
    for item in ranked:
        rows.append(
            {
                "dataset_id": item.dataset_id,
                "title": item.title,
                "rank": item.rank,
                "normalized": item.normalized,
                "scores": {d: c.score for d, c in item.contributions.items()},
                "matched": {
                    d: c.entity_id
                    for d, c in item.contributions.items()
                    if c.entity_id is not None
                },
            }
        )
    return tuple(rows)


def template_rationale(item: ScoredDataset, store: GraphStore) -> list[str]:
    """Deterministic rationale bullets built from retrieval evidence."""
    bullets = []
    for dimension, contribution in item.contributions.items():
        if contribution.score <= 0.0:
            continue
        phrase = _DIMENSION_PHRASES[dimension]
        if contribution.entity_id is not None and dimension in (
            "topic",
            "organization",
            "format",
            "license",
        ):
            entity = store.entities.get(contribution.entity_id)
            label = entity.label if entity is not None else contribution.entity_id
            bullets.append(f'{phrase} "{label}" (similarity {contribution.score:.4f}).')
        else:
            bullets.append(f"{phrase} F1 {contribution.score:.4f} against the request.")
    if not bullets:
        bullets.append("Passed all stated hard constraints.")
    return bullets


def _fallback_output(
    ranked: list[ScoredDataset],
    store: GraphStore,
    cfg: PipelineConfig,
    query: str,
    degraded: bool,
) -> SynthesisOutput:
    top = ranked[: cfg.answer_size]
    order = tuple(item.dataset_id for item in top)
    rationales = {item.dataset_id: template_rationale(item, store) for item in top}
    summary = (
        f"Found {len(ranked)} candidate dataset(s); showing the top {len(order)} "
        f"by relevance for: {query}"
    )
    subgraphs = {did: store.extract_subgraph(did) for did in order}
    return SynthesisOutput(
        order=order,
        summary=summary,
        rationales=rationales,
        degraded=degraded,
        subgraphs=subgraphs,
    )


def synthesize_answer(
    store: GraphStore,
    llm: LlmProvider,
    cfg: PipelineConfig,
    query: str,
    intent: GeoIntent,
    history: list[str],
    ranked: list[ScoredDataset],
) -> SynthesisOutput:
    """Produce the final ordered answer for the ranked candidates.

    The model may keep at most the answer-size prefix worth of datasets,
    reorder them, and write rationales; its order must be a duplicate-free
    subset of the ranked ids. An unscripted task falls back to the
    deterministic template; a provider outage does too, flagged degraded.
    """
    if not ranked:
        return SynthesisOutput(
            order=(),
            summary=f"No datasets in the catalog satisfy every stated constraint of: {query}",
            rationales={},
        )

    task = AnswerSynthesis(
        query=query,
        intent=dict(intent.texts),
        history=tuple(history),
        evidence=build_evidence(ranked),
    )
    try:
        draft = call_with_retries(lambda: llm.complete(task))
    except UnscriptedTask:
        return _fallback_output(ranked, store, cfg, query, degraded=False)
    except ProviderFailure:
        return _fallback_output(ranked, store, cfg, query, degraded=True)

    order = tuple(draft.order[: cfg.answer_size])
    by_id = {item.dataset_id: item for item in ranked}
    rationales = {}
    for did in order:
        bullets = draft.rationales.get(did)
        rationales[did] = list(bullets) if bullets else template_rationale(by_id[did], store)
    subgraphs = {did: store.extract_subgraph(did) for did in order}
    return SynthesisOutput(
        order=order,
        summary=draft.summary,
        rationales=rationales,
        subgraphs=subgraphs,
    )

"""Three-agent discovery workflow: intent parsing, graph retrieval, synthesis."""

from .config import PipelineConfig, ScoringWeights
from .intent import Confidence, GeoIntent, SpaceConstraint, TimeConstraint
from .orchestrator import (
    DiscoveryAnswer,
    EntitySelectionRequest,
    GeneralAnswer,
    PipelineEnv,
    handle_clarification,
    handle_entity_selection,
    run_discovery,
)
from .retrieval import CandidateEntity, RelevanceScore, ScoredDataset
from .session import ClarificationRequest, Question, SessionState, TraceEvent, canonical_trace
from .synthesis import SynthesisOutput

__all__ = [
    "CandidateEntity",
    "ClarificationRequest",
    "Confidence",
    "DiscoveryAnswer",
    "EntitySelectionRequest",
    "GeneralAnswer",
    "GeoIntent",
    "PipelineConfig",
    "PipelineEnv",
    "Question",
    "RelevanceScore",
    "ScoredDataset",
    "ScoringWeights",
    "SessionState",
    "SpaceConstraint",
    "SynthesisOutput",
    "TimeConstraint",
    "TraceEvent",
    "canonical_trace",
    "handle_clarification",
    "handle_entity_selection",
    "run_discovery",
]

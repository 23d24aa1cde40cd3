"""Deterministic embedding, LLM, geocoding, and time-parsing providers."""

from .embedding import DEFAULT_DIMENSION, EmbeddingProvider, HashingEmbedder, cosine, tokenize
from .geocoding import Gazetteer, GazetteerEntry, Geocoder
from .llm import LlmProvider, ScriptedLlm, call_with_retries, extract_intent_by_rules
from .timetext import parse_time_text, widen_begin, widen_end

__all__ = [
    "DEFAULT_DIMENSION",
    "EmbeddingProvider",
    "Gazetteer",
    "GazetteerEntry",
    "Geocoder",
    "HashingEmbedder",
    "LlmProvider",
    "ScriptedLlm",
    "call_with_retries",
    "cosine",
    "extract_intent_by_rules",
    "parse_time_text",
    "tokenize",
    "widen_begin",
    "widen_end",
]

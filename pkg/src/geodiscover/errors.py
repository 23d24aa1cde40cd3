"""Typed failure classes shared across the package."""
from __future__ import annotations


class GeodiscoverError(Exception):
    """Base class for all package-specific failures."""


# --- parsing / ingest ---

class MalformedDocument(GeodiscoverError):
    """Document could not be parsed as the claimed metadata standard."""


class MissingRequiredField(GeodiscoverError):
    """Document parsed but lacks a field the record cannot exist without."""


class Unreachable(GeodiscoverError):
    """Catalog endpoint unreachable after retries."""


class AuthRejected(GeodiscoverError):
    """Catalog rejected the configured credentials."""


# --- graph store ---

class IntegrityViolation(GeodiscoverError):
    """Same dataset identity ingested twice with conflicting content."""


class DimensionMismatch(GeodiscoverError):
    """Embedding does not match the graph's configured dimension."""


class UnknownKind(GeodiscoverError):
    """No index exists for the requested entity kind."""


class UnknownDataset(GeodiscoverError):
    """Dataset id not present in the graph."""


class IoFailure(GeodiscoverError):
    """Snapshot could not be read or written."""


class SchemaVersionMismatch(GeodiscoverError):
    """Snapshot was written by an incompatible schema version."""


class CorruptSnapshot(GeodiscoverError):
    """Snapshot failed checksum or structural validation."""


# --- providers ---

class ProviderFailure(GeodiscoverError):
    """An embedding/LLM/geocoding provider failed after retries."""

    #: Deterministic failures set this False so the retry wrapper fails fast.
    retryable = True


class UnscriptedTask(ProviderFailure):
    """Scripted provider had no entry or rule for the task; a test-fixture bug."""

    retryable = False


class SchemaViolation(ProviderFailure):
    """Provider returned output that does not validate against the task schema."""

    retryable = False


# --- pipeline sessions ---

class SessionBusy(GeodiscoverError):
    """The session is waiting on the user; new queries are refused."""


class NothingPending(GeodiscoverError):
    """A resume call arrived but no checkpoint is waiting."""


# --- evaluation ---

class EmptyGold(GeodiscoverError):
    """A test query has no gold constraints; EIMR is undefined."""


class MissingJudgments(GeodiscoverError):
    """No relevance judgments exist for a query that a run retrieved."""

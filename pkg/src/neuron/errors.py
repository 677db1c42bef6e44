"""Exception hierarchy shared across the package."""

from __future__ import annotations


class NeuronError(Exception):
    """Base class for all errors raised by this package."""


# --- embedding ---------------------------------------------------------


class EmptyText(NeuronError):
    """Text has no alphanumeric tokens after normalization."""


class DimensionMismatch(NeuronError):
    """Vector dimensions disagree with each other or with the store."""


class RemoteUnavailable(NeuronError):
    """Remote embedding endpoint failed after the retry budget."""


# --- memory store ------------------------------------------------------


class DuplicateProblem(NeuronError):
    """Problem text already present on a non-rejected record."""


class NotFound(NeuronError):
    """No record with the given id."""


class IllegalTransition(NeuronError):
    """Requested status change is not in the legal transition set."""


class StorageFailure(NeuronError):
    """Underlying filesystem write or read failed."""


class StoreMissing(NeuronError):
    """Store directory does not exist or was never initialized."""


class VersionMismatch(NeuronError):
    """Snapshot format version is not supported."""


class FingerprintMismatch(NeuronError):
    """Persisted embedder fingerprint disagrees with the configured one."""


class CorruptSnapshot(NeuronError):
    """Snapshot checksum or structure check failed."""


# --- feedback loop -----------------------------------------------------


class Ungradable(NeuronError):
    """No answer could be extracted or canonicalized from the text."""


class GoldMismatch(NeuronError):
    """Human-submitted answer contradicts the stored gold answer."""


class SolverUnavailable(NeuronError):
    """The solver client failed while processing an interaction."""


# --- completion clients ------------------------------------------------


class ClientError(NeuronError):
    """Base class for completion-client failures."""


class ScriptExhausted(ClientError):
    """Scripted client was asked for more responses than it was loaded with."""


class CompletionTimeout(ClientError):
    """Live request timed out after the retry budget."""


class RateLimited(ClientError):
    """Live endpoint kept returning 429 past the retry budget."""


class MalformedResponse(ClientError):
    """Live endpoint returned a body without the expected fields."""


class UpstreamError(ClientError):
    """Live endpoint kept failing with server errors past the retry budget."""


# --- prompt assembly ---------------------------------------------------


class QueryAloneOverBudget(NeuronError):
    """Preamble plus query alone exceed the prompt token budget."""


# --- evaluation --------------------------------------------------------


class EmptyDataset(NeuronError):
    """Dataset or test set is empty where items are required."""


class DatasetError(NeuronError):
    """Dataset file failed to parse; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(message)
        self.line = line


class MismatchedTestSets(NeuronError):
    """Two reports being compared cover different test items."""


# --- configuration -----------------------------------------------------


class ConfigError(NeuronError):
    """Invalid configuration file, key, or value."""

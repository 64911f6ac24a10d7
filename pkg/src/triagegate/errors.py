"""Exception hierarchy shared across the package.

Every error raised by triagegate derives from TriageError so callers can
catch the whole family with one clause. Transport-level backend failures
additionally derive from BackendTransportError, which is the retry boundary:
only these are ever retried by the client.
"""

from __future__ import annotations


class TriageError(Exception):
    """Base class for all triagegate errors."""


# --- metric arithmetic ---

class EmptyMatrix(TriageError):
    """Accuracy requested for a confusion matrix with zero total count."""


class EmptySamples(TriageError):
    """Latency statistics requested for an empty sample sequence."""


# --- prompt construction ---

class InsufficientBank(TriageError):
    """The example bank cannot supply the requested per-class example count."""

    def __init__(self, label, needed: int, available: int):
        self.label = label
        self.needed = needed
        self.available = available
        super().__init__(
            f"example bank holds {available} {label.value} phrases, need {needed}"
        )


class EmptyInput(TriageError):
    """Classification input text is empty."""


# --- backend client ---

class BackendTransportError(TriageError):
    """Connection-level failure; the only retryable error class."""


class Unreachable(BackendTransportError):
    """Backend could not be reached (connection refused, reset, DNS)."""


class Timeout(BackendTransportError):
    """Backend did not answer within the configured timeout."""


class BadStatus(TriageError):
    """Backend answered with a non-success HTTP status."""

    def __init__(self, status: int, body_excerpt: str):
        self.status = status
        self.body_excerpt = body_excerpt
        super().__init__(f"backend returned status {status}: {body_excerpt!r}")


class MalformedReply(TriageError):
    """Backend response body did not match the chat-completions schema."""


class Unparseable(TriageError):
    """Model reply contains neither class keyword.

    ``latency_s`` carries the round-trip time of the reply that failed to
    parse, when known, so callers can still account for it.
    """

    def __init__(self, excerpt: str, latency_s: float | None = None):
        self.excerpt = excerpt
        self.latency_s = latency_s
        super().__init__(f"reply has no class keyword: {excerpt!r}")


# --- servers ---

class PortInUse(TriageError):
    """Requested listen port is already bound."""


# --- dataset pipeline ---

class RoundOrderViolation(TriageError):
    """Ingested round number does not directly follow the dataset's history."""


class LabelMissing(TriageError):
    """A phrase record lacks a valid label."""


class EmptyRound(TriageError):
    """Rejection rate requested for a round with no candidates."""


class EmptyDataset(TriageError):
    """Operation requires at least one phrase."""


class FractionSum(TriageError):
    """Split fractions do not sum to 1."""


class EmptyClass(TriageError):
    """Stratified split requires at least one phrase of each class."""


# --- eval harness ---

class DatasetEmpty(TriageError):
    """Selected evaluation split contains no phrases."""


class TooFewRuns(TriageError):
    """Consistency check requires at least two reports."""

"""Core value types and metric arithmetic.

Everything here is an immutable value with pure functions over it, safe to
share between threads. Ratios are carried at full double precision; rounding
to 4 decimal places happens only when reports are rendered.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import EmptyMatrix, EmptySamples

SOURCES = ("curated", "generated")
SPLITS = ("train", "validation", "test")


class Label(Enum):
    """Binary classification outcome. Serialized forms are fixed."""

    EMERGENCY = "emergency"
    NON_EMERGENCY = "non_emergency"

    @classmethod
    def from_string(cls, value: str) -> "Label":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown label {value!r}")

    def opposite(self) -> "Label":
        return Label.NON_EMERGENCY if self is Label.EMERGENCY else Label.EMERGENCY


@dataclass(frozen=True)
class LabeledPhrase:
    """One text scenario with ground truth, provenance and split assignment.

    ``round`` is 0 exactly for hand-curated phrases; generated phrases carry
    the 1-based generation round that produced them.
    """

    text: str
    label: Label
    source: str = "curated"
    round: int = 0
    split: Optional[str] = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("phrase text must be non-empty")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.round < 0:
            raise ValueError("round must be non-negative")
        if (self.round == 0) != (self.source == "curated"):
            raise ValueError("round 0 is reserved for curated phrases")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 outcome counts; emergency is the positive class of the raw cells."""

    tp: int  # actual emergency, predicted emergency
    fn: int  # actual emergency, predicted non-emergency
    fp: int  # actual non-emergency, predicted emergency
    tn: int  # actual non-emergency, predicted non-emergency

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @property
    def actual_emergencies(self) -> int:
        return self.tp + self.fn

    @property
    def actual_non_emergencies(self) -> int:
        return self.fp + self.tn


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class LatencyStats:
    count: int
    min_s: float
    max_s: float
    mean_s: float
    p50_s: float
    p95_s: float


@dataclass(frozen=True)
class EvalReport:
    """One evaluation run: raw matrix plus every derived metric.

    ``unparseable_count`` is the number of replies that carried no class
    keyword; ``incomplete`` marks a run aborted by a backend failure, in
    which case the matrix covers only the phrases classified before the
    abort.
    """

    matrix: ConfusionMatrix
    accuracy: float
    emergency: ClassMetrics
    non_emergency: ClassMetrics
    latency: LatencyStats
    model_id: str
    platform: str
    k_examples: int
    run_index: int
    unparseable_count: int = 0
    incomplete: bool = False


def confusion_from_pairs(
    pairs: Iterable[tuple[Label, Label]],
) -> ConfusionMatrix:
    """Count (actual, predicted) pairs into a confusion matrix."""
    tp = fn = fp = tn = 0
    for actual, predicted in pairs:
        if actual is Label.EMERGENCY:
            if predicted is Label.EMERGENCY:
                tp += 1
            else:
                fn += 1
        else:
            if predicted is Label.EMERGENCY:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fn=fn, fp=fp, tn=tn)


def accuracy_of(m: ConfusionMatrix) -> float:
    """Proportion of correctly classified instances across both classes."""
    if m.total == 0:
        raise EmptyMatrix("cannot compute accuracy of an empty matrix")
    return (m.tp + m.tn) / m.total


def _ratio(numerator: int, denominator: int) -> float:
    # 0/0 yields 0.0 by contract so degenerate runs still render a report.
    if denominator == 0:
        return 0.0
    return numerator / denominator


def class_metrics(m: ConfusionMatrix, positive: Label) -> ClassMetrics:
    """Precision/recall/F1 with the chosen class treated as positive.

    For the non-emergency class the cells are reinterpreted: its true
    positives are the matrix's tn cell, its false positives are missed
    emergencies (fn), and its false negatives are false alarms (fp).
    """
    if positive is Label.EMERGENCY:
        tp, fp, fn = m.tp, m.fp, m.fn
    else:
        tp, fp, fn = m.tn, m.fn, m.fp
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    if precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ClassMetrics(precision=precision, recall=recall, f1=f1)


def _nearest_rank(sorted_samples: Sequence[float], percentile: float) -> float:
    # Nearest-rank definition: value at 1-based index ceil(p * n).
    rank = math.ceil(percentile * len(sorted_samples))
    rank = max(rank, 1)
    return sorted_samples[rank - 1]


def latency_stats(samples: Sequence[float]) -> LatencyStats:
    """Order-invariant summary of request latencies, percentiles by nearest rank."""
    if not samples:
        raise EmptySamples("latency stats require at least one sample")
    ordered = sorted(samples)
    return LatencyStats(
        count=len(ordered),
        min_s=ordered[0],
        max_s=ordered[-1],
        mean_s=statistics.fmean(ordered),
        p50_s=_nearest_rank(ordered, 0.50),
        p95_s=_nearest_rank(ordered, 0.95),
    )

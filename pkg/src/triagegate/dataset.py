"""Dataset curation pipeline: round ingestion, review bookkeeping,
deduplication, balance checks and stratified splitting.

A dataset is an ordered sequence of LabeledPhrase values stored as JSONL,
one object per line: {"text", "label", "source", "round", "split"}.
All operations are pure transformations; file writes happen only in the
load/save helpers and are not safe for concurrent writers (the CLI takes
an advisory lock around them).
"""

from __future__ import annotations

import json
import random
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import (
    EmptyClass,
    EmptyDataset,
    EmptyRound,
    FractionSum,
    LabelMissing,
    RoundOrderViolation,
)
from .model import Label, LabeledPhrase

_TERMINAL_PUNCTUATION = string.punctuation


def normalize_text(text: str) -> str:
    """Dedup key: casefold, collapse whitespace, strip terminal punctuation.

    Deliberately no stemming or fuzzy matching; aggressive merging risks
    collapsing clinically distinct phrases.
    """
    collapsed = " ".join(text.split())
    return collapsed.casefold().rstrip(_TERMINAL_PUNCTUATION + " ")


@dataclass(frozen=True)
class DatasetRound:
    """One generation-review cycle: candidates plus the reviewer's rejections."""

    round: int
    candidates: tuple[LabeledPhrase, ...]
    rejected_texts: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.round < 1:
            raise ValueError("round numbers start at 1")
        for phrase in self.candidates:
            if phrase.source != "generated":
                raise ValueError("round candidates must have source=generated")
            if phrase.round != self.round:
                raise ValueError(
                    f"candidate carries round {phrase.round}, expected {self.round}"
                )
        candidate_texts = {p.text for p in self.candidates}
        stray = set(self.rejected_texts) - candidate_texts
        if stray:
            raise ValueError(f"rejected texts not among candidates: {sorted(stray)[:3]}")


@dataclass(frozen=True)
class SplitSpec:
    """Stratified split fractions; must sum to 1 within 1e-9."""

    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for frac in (self.train_frac, self.val_frac, self.test_frac):
            if frac < 0:
                raise FractionSum("split fractions must be non-negative")
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise FractionSum(f"split fractions sum to {total}, expected 1.0")


@dataclass(frozen=True)
class RoundReport:
    """Bookkeeping for one ingested round."""

    round: int
    candidates: int
    rejected: int
    duplicates: int
    accepted: int


@dataclass(frozen=True)
class BalanceReport:
    emergency: int
    non_emergency: int
    imbalance_ratio: float


def max_round(dataset: Sequence[LabeledPhrase]) -> int:
    return max((p.round for p in dataset), default=0)


def ingest_candidates(
    existing: Sequence[LabeledPhrase], round_: DatasetRound
) -> tuple[list[LabeledPhrase], RoundReport]:
    """Append a round's accepted candidates to the dataset.

    A candidate is dropped when the reviewer rejected it or when its
    normalized text already occurs in the dataset (or earlier in the same
    round). Rounds must arrive in order: round N+1 directly after N.
    """
    expected = max_round(existing) + 1
    if round_.round != expected:
        raise RoundOrderViolation(
            f"got round {round_.round}, expected round {expected}"
        )
    seen = {normalize_text(p.text) for p in existing}
    accepted: list[LabeledPhrase] = []
    rejected = duplicates = 0
    for candidate in round_.candidates:
        if candidate.text in round_.rejected_texts:
            rejected += 1
            continue
        key = normalize_text(candidate.text)
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        accepted.append(candidate)
    report = RoundReport(
        round=round_.round,
        candidates=len(round_.candidates),
        rejected=rejected,
        duplicates=duplicates,
        accepted=len(accepted),
    )
    return list(existing) + accepted, report


def rejection_rate(round_: DatasetRound) -> float:
    """Fraction of a round's candidates eliminated during review."""
    if not round_.candidates:
        raise EmptyRound(f"round {round_.round} has no candidates")
    return len(round_.rejected_texts) / len(round_.candidates)


def deduplicate(
    dataset: Sequence[LabeledPhrase],
) -> tuple[list[LabeledPhrase], int]:
    """Drop phrases whose normalized text was already seen; first wins."""
    seen: set[str] = set()
    kept: list[LabeledPhrase] = []
    removed = 0
    for phrase in dataset:
        key = normalize_text(phrase.text)
        if key in seen:
            removed += 1
            continue
        seen.add(key)
        kept.append(phrase)
    return kept, removed


def check_balance(dataset: Sequence[LabeledPhrase]) -> BalanceReport:
    """Per-class counts and |E-N| / (E+N) imbalance ratio."""
    if not dataset:
        raise EmptyDataset("balance check requires at least one phrase")
    emergency = sum(1 for p in dataset if p.label is Label.EMERGENCY)
    non_emergency = len(dataset) - emergency
    ratio = abs(emergency - non_emergency) / len(dataset)
    return BalanceReport(
        emergency=emergency, non_emergency=non_emergency, imbalance_ratio=ratio
    )


def split_dataset(
    dataset: Sequence[LabeledPhrase], spec: SplitSpec
) -> list[LabeledPhrase]:
    """Assign train/validation/test splits, stratified per class.

    Within each class the indices are shuffled with the spec seed and cut
    contiguously at round(frac * class_size) boundaries, train first, then
    validation, remainder test. Every phrase gets exactly one split; the
    returned list preserves the input order.
    """
    all_fracs_positive = min(spec.train_frac, spec.val_frac, spec.test_frac) > 0
    by_class: dict[Label, list[int]] = {Label.EMERGENCY: [], Label.NON_EMERGENCY: []}
    for index, phrase in enumerate(dataset):
        by_class[phrase.label].append(index)
    if all_fracs_positive:
        for label, indices in by_class.items():
            if not indices:
                raise EmptyClass(f"no {label.value} phrases to split")

    assignment: dict[int, str] = {}
    for label in (Label.EMERGENCY, Label.NON_EMERGENCY):
        indices = list(by_class[label])
        rng = random.Random(f"{spec.seed}:{label.value}")
        rng.shuffle(indices)
        size = len(indices)
        n_train = round(spec.train_frac * size)
        n_val = round(spec.val_frac * size)
        for position, index in enumerate(indices):
            if position < n_train:
                assignment[index] = "train"
            elif position < n_train + n_val:
                assignment[index] = "validation"
            else:
                assignment[index] = "test"

    return [
        LabeledPhrase(
            text=phrase.text,
            label=phrase.label,
            source=phrase.source,
            round=phrase.round,
            split=assignment.get(index),
        )
        for index, phrase in enumerate(dataset)
    ]


# --- JSONL persistence ---


def phrase_to_record(phrase: LabeledPhrase) -> dict:
    return {
        "text": phrase.text,
        "label": phrase.label.value,
        "source": phrase.source,
        "round": phrase.round,
        "split": phrase.split,
    }


def phrase_from_record(record: dict, context: str = "") -> LabeledPhrase:
    where = f" ({context})" if context else ""
    if "label" not in record or record["label"] is None:
        raise LabelMissing(f"record has no label{where}: {record.get('text')!r}")
    try:
        label = Label.from_string(record["label"])
    except ValueError as exc:
        raise LabelMissing(f"record has invalid label{where}: {record['label']!r}") from exc
    return LabeledPhrase(
        text=record["text"],
        label=label,
        source=record.get("source", "curated"),
        round=record.get("round", 0),
        split=record.get("split"),
    )


def load_phrases(path: str | Path) -> list[LabeledPhrase]:
    phrases = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            phrases.append(phrase_from_record(record, f"{path}:{line_number}"))
    return phrases


def save_phrases(path: str | Path, phrases: Iterable[LabeledPhrase]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for phrase in phrases:
            handle.write(json.dumps(phrase_to_record(phrase), ensure_ascii=False) + "\n")


def load_round(
    candidates_path: str | Path, sidecar_path: Optional[str | Path] = None
) -> DatasetRound:
    """Read a round file (candidate JSONL) plus its review sidecar.

    The sidecar is JSON {"round": int, "rejected": [texts]}. Without one,
    the round number is taken from the candidates and nothing is rejected.
    """
    rejected: frozenset[str] = frozenset()
    round_number: Optional[int] = None
    if sidecar_path is not None:
        with open(sidecar_path, encoding="utf-8") as handle:
            sidecar = json.load(handle)
        round_number = sidecar["round"]
        rejected = frozenset(sidecar.get("rejected", []))

    candidates = []
    with open(candidates_path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            if round_number is not None:
                record.setdefault("round", round_number)
            record.setdefault("source", "generated")
            candidates.append(
                phrase_from_record(record, f"{candidates_path}:{line_number}")
            )
    if round_number is None:
        rounds = {p.round for p in candidates}
        if len(rounds) != 1:
            raise ValueError(f"candidates carry mixed round numbers: {sorted(rounds)}")
        round_number = rounds.pop()
    return DatasetRound(
        round=round_number, candidates=tuple(candidates), rejected_texts=rejected
    )

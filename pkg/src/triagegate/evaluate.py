"""Balanced-set evaluation: classify a split through a backend, compute the
full metric suite, validate consistency across runs, and sweep the example
count.

Reports render as human-readable text (2x2 matrix layout) or as flat CSV
rows; float fields are rounded to 4 decimal places at render time only.
"""

from __future__ import annotations

import csv
import io
import logging
import random
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .client import BackendConfig, classify_text
from .dataset import load_phrases
from .errors import (
    BackendTransportError,
    BadStatus,
    DatasetEmpty,
    MalformedReply,
    TooFewRuns,
    Unparseable,
)
from .model import (
    ConfusionMatrix,
    EvalReport,
    Label,
    LabeledPhrase,
    accuracy_of,
    class_metrics,
    confusion_from_pairs,
    latency_stats,
)
from .prompting import ExampleBank, PromptSpec

logger = logging.getLogger(__name__)

UNPARSEABLE_POLICIES = ("score_as_non_emergency", "exclude")

CSV_COLUMNS = (
    "model_id,platform,k_examples,run_index,tp,fn,fp,tn,accuracy,"
    "prec_e,rec_e,f1_e,prec_n,rec_n,f1_n,"
    "lat_min,lat_mean,lat_p50,lat_p95,lat_max"
).split(",")

_BACKEND_FAILURES = (BackendTransportError, BadStatus, MalformedReply)


@dataclass(frozen=True)
class EvalConfig:
    dataset_path: str | Path
    backend: BackendConfig
    prompt: PromptSpec = field(default_factory=PromptSpec)
    split: str = "test"
    runs: int = 3
    unparseable_policy: str = "score_as_non_emergency"
    parallelism: int = 1
    platform: str = "local"

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.unparseable_policy not in UNPARSEABLE_POLICIES:
            raise ValueError(f"unknown unparseable policy {self.unparseable_policy!r}")


@dataclass(frozen=True)
class SweepConfig:
    base: EvalConfig
    ks: tuple[int, ...] = (0, 8, 10, 20)

    def __post_init__(self):
        if any(k < 0 for k in self.ks):
            raise ValueError("ks must be non-negative")
        if list(self.ks) != sorted(set(self.ks)):
            raise ValueError("ks must be strictly increasing")


@dataclass(frozen=True)
class SweepRow:
    k: int
    mean_accuracy: float
    fn: int
    fp: int


@dataclass(frozen=True)
class ConsistencyVerdict:
    passed: bool
    max_delta: float
    tolerance: float


@dataclass(frozen=True)
class _Outcome:
    actual: Label
    predicted: Optional[Label]  # None when excluded by policy
    latency_s: Optional[float]
    unparseable: bool


def _classify_one(
    phrase: LabeledPhrase,
    prompt: PromptSpec,
    bank: ExampleBank,
    backend: BackendConfig,
    policy: str,
) -> _Outcome:
    try:
        label, latency_s = classify_text(phrase.text, prompt, bank, backend)
    except Unparseable as exc:
        # Unsafe-side default: score the miss as non_emergency so an
        # unparseable reply to a real emergency shows up as a false negative.
        predicted = Label.NON_EMERGENCY if policy == "score_as_non_emergency" else None
        return _Outcome(phrase.label, predicted, exc.latency_s, True)
    return _Outcome(phrase.label, label, latency_s, False)


def _single_run(
    phrases: Sequence[LabeledPhrase],
    bank: ExampleBank,
    config: EvalConfig,
    run_index: int,
) -> tuple[list[_Outcome], Optional[Exception]]:
    order = list(phrases)
    random.Random(f"{config.prompt.selection_seed}:{run_index}").shuffle(order)
    outcomes: list[_Outcome] = []
    failure: Optional[Exception] = None

    if config.parallelism == 1:
        for phrase in order:
            try:
                outcomes.append(
                    _classify_one(
                        phrase, config.prompt, bank, config.backend,
                        config.unparseable_policy,
                    )
                )
            except _BACKEND_FAILURES as exc:
                failure = exc
                break
        return outcomes, failure

    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        futures = [
            pool.submit(
                _classify_one,
                phrase, config.prompt, bank, config.backend,
                config.unparseable_policy,
            )
            for phrase in order
        ]
        done, pending = wait(futures, return_when=FIRST_EXCEPTION)
        for future in pending:
            future.cancel()
        for future in done:
            if future.cancelled():
                continue
            exc = future.exception()
            if exc is not None:
                if not isinstance(exc, _BACKEND_FAILURES):
                    raise exc
                failure = exc  # keep one; aggregation is order-independent
                continue
            outcomes.append(future.result())
    return outcomes, failure


def _report_from_outcomes(
    outcomes: Sequence[_Outcome],
    config: EvalConfig,
    run_index: int,
    incomplete: bool,
) -> EvalReport:
    pairs = [
        (o.actual, o.predicted) for o in outcomes if o.predicted is not None
    ]
    latencies = [o.latency_s for o in outcomes if o.latency_s is not None]
    matrix = confusion_from_pairs(pairs)
    return EvalReport(
        matrix=matrix,
        accuracy=accuracy_of(matrix),
        emergency=class_metrics(matrix, Label.EMERGENCY),
        non_emergency=class_metrics(matrix, Label.NON_EMERGENCY),
        latency=latency_stats(latencies),
        model_id=config.backend.model_id,
        platform=config.platform,
        k_examples=config.prompt.k_examples,
        run_index=run_index,
        unparseable_count=sum(1 for o in outcomes if o.unparseable),
        incomplete=incomplete,
    )


def run_eval(config: EvalConfig) -> list[EvalReport]:
    """Classify the selected split once per run, one report per run.

    A backend failure aborts the evaluation: the interrupted run becomes a
    partial report flagged incomplete (or the failure propagates when
    nothing was classified at all).
    """
    all_phrases = load_phrases(config.dataset_path)
    selected = [p for p in all_phrases if p.split == config.split]
    if not selected:
        raise DatasetEmpty(
            f"split {config.split!r} of {config.dataset_path} has no phrases"
        )
    emergencies = sum(1 for p in selected if p.label is Label.EMERGENCY)
    if emergencies * 2 != len(selected):
        logger.warning(
            "split %r is unbalanced: %d emergency vs %d non-emergency",
            config.split, emergencies, len(selected) - emergencies,
        )
    bank = ExampleBank.from_phrases(all_phrases)

    reports: list[EvalReport] = []
    for run_index in range(1, config.runs + 1):
        outcomes, failure = _single_run(selected, bank, config, run_index)
        if failure is not None:
            logger.error("run %d aborted: %s", run_index, failure)
            if not any(o.predicted is not None for o in outcomes):
                raise failure
            reports.append(
                _report_from_outcomes(outcomes, config, run_index, incomplete=True)
            )
            break
        reports.append(
            _report_from_outcomes(outcomes, config, run_index, incomplete=False)
        )
    return reports


def run_sweep(config: SweepConfig) -> list[SweepRow]:
    """Evaluate once per example count; accuracy averaged across runs."""
    rows = []
    for k in config.ks:
        eval_config = replace(
            config.base, prompt=replace(config.base.prompt, k_examples=k)
        )
        reports = run_eval(eval_config)
        rows.append(
            SweepRow(
                k=k,
                mean_accuracy=sum(r.accuracy for r in reports) / len(reports),
                fn=reports[0].matrix.fn,
                fp=reports[0].matrix.fp,
            )
        )
    return rows


def check_consistency(
    reports: Sequence[EvalReport], tolerance: float = 0.0
) -> ConsistencyVerdict:
    """Pass iff the largest pairwise accuracy difference is within tolerance."""
    if len(reports) < 2:
        raise TooFewRuns("consistency check needs at least two reports")
    accuracies = [r.accuracy for r in reports]
    max_delta = max(accuracies) - min(accuracies)
    return ConsistencyVerdict(
        passed=max_delta <= tolerance, max_delta=max_delta, tolerance=tolerance
    )


def _f(value: float) -> str:
    return f"{value:.4f}"


def _render_text(reports: Sequence[EvalReport]) -> str:
    blocks = []
    for report in reports:
        m = report.matrix
        lines = [
            f"model={report.model_id}  platform={report.platform}  "
            f"k_examples={report.k_examples}  run={report.run_index}",
            "",
            f"{'':24}{'Predicted Emergency':>20}  {'Predicted Non-Emergency':>24}",
            f"{'Actual Emergency':<24}{m.tp:>20}  {m.fn:>24}",
            f"{'Actual Non-Emergency':<24}{m.fp:>20}  {m.tn:>24}",
            "",
            f"accuracy: {_f(report.accuracy)}  (n={m.total})",
            f"emergency:     precision={_f(report.emergency.precision)}  "
            f"recall={_f(report.emergency.recall)}  f1={_f(report.emergency.f1)}",
            f"non_emergency: precision={_f(report.non_emergency.precision)}  "
            f"recall={_f(report.non_emergency.recall)}  f1={_f(report.non_emergency.f1)}",
            f"latency_s: min={_f(report.latency.min_s)}  mean={_f(report.latency.mean_s)}  "
            f"p50={_f(report.latency.p50_s)}  p95={_f(report.latency.p95_s)}  "
            f"max={_f(report.latency.max_s)}",
        ]
        if report.unparseable_count:
            lines.append(f"unparseable replies: {report.unparseable_count}")
        if report.incomplete:
            lines.append("NOTE: run aborted early; counts cover a partial split")
        blocks.append("\n".join(lines))
    return ("\n\n" + "=" * 72 + "\n\n").join(blocks) + "\n"


def _render_csv(reports: Sequence[EvalReport]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        m = r.matrix
        writer.writerow(
            [
                r.model_id, r.platform, r.k_examples, r.run_index,
                m.tp, m.fn, m.fp, m.tn,
                _f(r.accuracy),
                _f(r.emergency.precision), _f(r.emergency.recall), _f(r.emergency.f1),
                _f(r.non_emergency.precision), _f(r.non_emergency.recall),
                _f(r.non_emergency.f1),
                _f(r.latency.min_s), _f(r.latency.mean_s), _f(r.latency.p50_s),
                _f(r.latency.p95_s), _f(r.latency.max_s),
            ]
        )
    return buffer.getvalue()


def render_report(reports: Sequence[EvalReport], format: str = "text") -> bytes:
    """Render reports as display text or as the flat CSV schema."""
    if not reports:
        raise ValueError("render_report needs at least one report")
    if format == "text":
        return _render_text(reports).encode("utf-8")
    if format == "csv":
        return _render_csv(reports).encode("utf-8")
    raise ValueError(f"unknown format {format!r}")


def render_sweep(rows: Sequence[SweepRow], format: str = "text") -> bytes:
    """Render the sweep table (text columns or CSV)."""
    if format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["k", "mean_accuracy", "fn", "fp"])
        for row in rows:
            writer.writerow([row.k, _f(row.mean_accuracy), row.fn, row.fp])
        return buffer.getvalue().encode("utf-8")
    if format == "text":
        lines = [f"{'k':>4}  {'mean_accuracy':>14}  {'fn':>6}  {'fp':>6}"]
        for row in rows:
            lines.append(
                f"{row.k:>4}  {_f(row.mean_accuracy):>14}  {row.fn:>6}  {row.fp:>6}"
            )
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown format {format!r}")

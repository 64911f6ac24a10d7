"""Matplotlib renderings of evaluation output, written to image files
alongside the text/CSV reports.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import SweepRow
from .model import EvalReport


def save_confusion_matrix(report: EvalReport, path: str | Path) -> Path:
    """2x2 heatmap with counts, matching the text report's layout."""
    m = report.matrix
    cells = np.array([[m.tp, m.fn], [m.fp, m.tn]])
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    image = ax.imshow(cells, cmap="Blues")
    for (row, col), value in np.ndenumerate(cells):
        threshold = cells.max() / 2 if cells.max() else 0.5
        ax.text(
            col, row, str(value), ha="center", va="center",
            color="white" if value > threshold else "black", fontsize=14,
        )
    ax.set_xticks([0, 1], ["Predicted\nEmergency", "Predicted\nNon-Emergency"])
    ax.set_yticks([0, 1], ["Actual\nEmergency", "Actual\nNon-Emergency"])
    ax.set_title(
        f"{report.model_id} on {report.platform} "
        f"(k={report.k_examples}, run {report.run_index})\n"
        f"accuracy {report.accuracy:.4f}"
    )
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_accuracy_by_k(rows: Sequence[SweepRow], path: str | Path) -> Path:
    """Accuracy (%) against the number of in-prompt examples."""
    ks = [row.k for row in rows]
    accuracies = [row.mean_accuracy * 100 for row in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    ax.plot(ks, accuracies, marker="o", linewidth=2)
    for k, acc in zip(ks, accuracies):
        ax.annotate(f"{acc:.1f}", (k, acc), textcoords="offset points", xytext=(0, 8))
    ax.set_xlabel("In-prompt examples (k)")
    ax.set_ylabel("Accuracy (%)")
    ax.set_title("Accuracy by example count")
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_latency_profile(reports: Sequence[EvalReport], path: str | Path) -> Path:
    """Grouped bars of the latency summary statistics per run."""
    stats = ("min_s", "p50_s", "mean_s", "p95_s", "max_s")
    labels = ("min", "p50", "mean", "p95", "max")
    n_runs = len(reports)
    width = 0.8 / n_runs
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    positions = np.arange(len(stats))
    for i, report in enumerate(reports):
        values = [getattr(report.latency, name) for name in stats]
        offset = (i - (n_runs - 1) / 2) * width
        ax.bar(positions + offset, values, width, label=f"run {report.run_index}")
    ax.set_xticks(positions, labels)
    ax.set_ylabel("Latency (s)")
    ax.set_title("Backend latency per run")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path

"""Report serialization: JSON, per-item CSV, and rendered figures.

Report files are deterministic byte-for-byte for a given run (no
timestamps, stable key order) so repeated runs can be diffed directly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import ComparisonReport, EvaluationReport


def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "arm": report.arm,
        "accuracy": report.accuracy,
        "counts": {k: report.counts.get(k, 0) for k in ("correct", "incorrect", "ungradable")},
        "items": [
            {
                "id": item.id,
                "verdict": item.verdict,
                "exemplar_ids": item.exemplar_ids,
                "prompt_tokens": item.prompt_tokens,
                "top_score": item.top_score,
            }
            for item in report.items
        ],
    }


def comparison_to_dict(cmp: ComparisonReport) -> dict:
    return {
        "baseline_accuracy": cmp.baseline.accuracy,
        "augmented_accuracy": cmp.augmented.accuracy,
        "delta_points": cmp.delta_points,
        "flip_counts": cmp.flip_counts,
        "flips": {item.id: cmp.flips[item.id] for item in cmp.baseline.items},
    }


def write_report_json(report: EvaluationReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2) + "\n", encoding="utf-8")


def write_comparison_json(cmp: ComparisonReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(comparison_to_dict(cmp), indent=2) + "\n", encoding="utf-8")


def write_items_csv(reports: Sequence[EvaluationReport], path: str | Path) -> None:
    """One row per (item, arm): id, arm, verdict, score of the top exemplar."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "arm", "verdict", "top_exemplar_score"])
        for report in reports:
            for item in report.items:
                score = "" if item.top_score is None else f"{item.top_score:.6f}"
                writer.writerow([item.id, report.arm, item.verdict, score])


def render_arm_figure(report: EvaluationReport, path: str | Path) -> None:
    """Verdict counts for a single arm."""
    labels = ["correct", "incorrect", "ungradable"]
    values = [report.counts.get(k, 0) for k in labels]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(labels, values, color=["#2a9d8f", "#e76f51", "#999999"])
    ax.set_ylabel("items")
    ax.set_title(f"{report.arm} arm, accuracy {report.accuracy:.3f}")
    for i, v in enumerate(values):
        ax.text(i, v, str(v), ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_comparison_figure(cmp: ComparisonReport, path: str | Path) -> None:
    """Accuracy bars for both arms next to the per-item flip breakdown."""
    fig, (ax_acc, ax_flip) = plt.subplots(1, 2, figsize=(8, 3.2))

    arms = ["baseline", "augmented"]
    accs = [cmp.baseline.accuracy, cmp.augmented.accuracy]
    ax_acc.bar(arms, accs, color=["#888888", "#2a9d8f"])
    ax_acc.set_ylim(0, 1.05)
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_title(f"delta {cmp.delta_points:+.1f}pp")
    for i, v in enumerate(accs):
        ax_acc.text(i, v, f"{v:.3f}", ha="center", va="bottom", fontsize=9)

    counts = cmp.flip_counts
    labels = ["fixed", "broken", "unchanged"]
    values = [counts[k] for k in labels]
    ax_flip.bar(labels, values, color=["#2a9d8f", "#e76f51", "#bbbbbb"])
    ax_flip.set_ylabel("items")
    ax_flip.set_title("baseline vs augmented flips")
    for i, v in enumerate(values):
        ax_flip.text(i, v, str(v), ha="center", va="bottom", fontsize=9)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

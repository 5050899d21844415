"""Report rendering: structured text, TSV summaries, and figures.

Every rendered artifact is deterministic for identical inputs, including
the PNGs, so rerunning a command leaves byte-identical outputs.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .corpus import atomic_write_text
from .evaluation import EvalReport, TaskCounts

TSV_HEADER = ("category", "precision", "recall", "f1", "matched", "predicted", "gold")


def report_rows(report: EvalReport) -> list[tuple]:
    rows = []
    for name, counts in report.per_category.items():
        rows.append((name, counts.precision, counts.recall, counts.f1,
                     counts.matched, counts.predicted, counts.gold))
    rows.append(("overall", report.precision, report.recall, report.f1,
                 report.counts.matched, report.counts.predicted, report.counts.gold))
    return rows


def render_report_tsv(report: EvalReport) -> str:
    lines = ["\t".join(TSV_HEADER)]
    for name, p, r, f, m, pred, gold in report_rows(report):
        lines.append(f"{name}\t{p:.4f}\t{r:.4f}\t{f:.4f}\t{m}\t{pred}\t{gold}")
    return "\n".join(lines) + "\n"


def render_report_text(title: str, report: EvalReport) -> str:
    lines = [title, "=" * len(title), f"averaging: {report.average}", ""]
    for name, p, r, f, m, pred, gold in report_rows(report):
        lines.append(
            f"{name:<12} P={p:6.4f}  R={r:6.4f}  F1={f:6.4f}  "
            f"(matched {m} / predicted {pred} / gold {gold})"
        )
    lines.append("")
    lines.append("per process:")
    for pid in sorted(report.per_process):
        c: TaskCounts = report.per_process[pid]
        lines.append(
            f"  {pid:<24} P={c.precision:6.4f}  R={c.recall:6.4f}  F1={c.f1:6.4f}"
        )
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, tsv_path: str, text_path: str, title: str) -> None:
    atomic_write_text(tsv_path, render_report_tsv(report))
    atomic_write_text(text_path, render_report_text(title, report))


def render_metrics_figure(reports: Mapping[str, EvalReport], path: str) -> None:
    """Grouped bar chart of P/R/F1 per category, one panel per task."""
    fig, axes = plt.subplots(1, max(len(reports), 1), figsize=(6.0 * max(len(reports), 1), 4.0))
    if len(reports) <= 1:
        axes = [axes]
    for ax, (task, report) in zip(axes, sorted(reports.items())):
        rows = report_rows(report)
        labels = [row[0] for row in rows]
        xs = range(len(rows))
        width = 0.27
        ax.bar([x - width for x in xs], [row[1] for row in rows], width, label="precision")
        ax.bar(list(xs), [row[2] for row in rows], width, label="recall")
        ax.bar([x + width for x in xs], [row[3] for row in rows], width, label="f1")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels, rotation=30, ha="right")
        ax.set_ylim(0.0, 1.05)
        ax.set_title(task)
        ax.legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def render_scores_figure(scores: Sequence[tuple[str, float]], path: str) -> None:
    """Bar chart of decode path scores per process."""
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(scores) + 2.0), 4.0))
    ordered = sorted(scores)
    ax.bar(range(len(ordered)), [s for _, s in ordered])
    ax.set_xticks(range(len(ordered)))
    ax.set_xticklabels([pid for pid, _ in ordered], rotation=30, ha="right")
    ax.set_ylabel("path score")
    ax.set_title("decode path scores")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)

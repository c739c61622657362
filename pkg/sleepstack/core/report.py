"""
CSV tables and SVG figures for evaluation and analysis results

Identical inputs give byte-identical files: SVG ids use a fixed salt and no
creation date is embedded.
"""

import csv
import logging
from typing import List, Mapping, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from .errors import ReportError  # noqa: E402
from .metrics import ConfusionMatrix, MetricsReport  # noqa: E402
from .stats import AnovaResult, KdeCurve  # noqa: E402

logger = logging.getLogger(__name__)

COMPARISON_COLUMNS = ["Method", "Exp. Task", "S1 Sens.", "Avg Sens.", "Avg Spec.", "Epoch-Wise Acc", "Patient-Wise Acc"]
SVG_SALT = "sleepstack"


def _number(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def _write_rows(path: str, header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
    if not rows:
        raise ReportError(f"Nothing to write to {path}")
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise ReportError(f"Cannot write {path}: {e}")
    logger.debug(f"Wrote {len(rows)} rows to {path}")


def write_metrics_csv(path: str, report: MetricsReport) -> None:
    if report is None or not report.class_names:
        raise ReportError("No metrics to report")
    rows: List[Tuple[str, str, str]] = []
    for name, value in zip(report.class_names, report.sensitivity):
        rows.append(("Sens.", name, _number(value)))
    for name, value in zip(report.class_names, report.specificity):
        rows.append(("Spec.", name, _number(value)))
    rows.append(("Avg Sens.", "", _number(report.avg_sensitivity)))
    rows.append(("Avg Spec.", "", _number(report.avg_specificity)))
    rows.append(("Epoch-Wise Acc", "", _number(report.epoch_accuracy)))
    rows.append(("Patient-Wise Acc", "", _number(report.patient_accuracy)))
    rows.append(("Patient-Wise Acc (recordings)", "", _number(report.recording_patient_accuracy)))
    _write_rows(path, ["metric", "class", "value"], rows)


def write_confusion_csv(path: str, cm: ConfusionMatrix, normalized: bool = False) -> None:
    """Counts, or row percentages when normalized"""
    values = cm.row_normalized() if normalized else cm.counts
    rows = [
        [name] + [f"{v:.2f}" if normalized else str(int(v)) for v in row]
        for name, row in zip(cm.class_names, values)
    ]
    _write_rows(path, ["true\\pred"] + list(cm.class_names), rows)


def write_per_recording_csv(path: str, report: MetricsReport) -> None:
    rows = [[r.recording_id, r.subject_id, r.subset, _number(r.accuracy)] for r in report.per_recording]
    _write_rows(path, ["recording_id", "subject_id", "subset", "accuracy"], rows)


def write_anova_csv(path: str, results: Sequence[Tuple[str, str, AnovaResult]]) -> None:
    rows = [
        [feature, band, repr(r.f_stat), r.df_between, r.df_within, r.p_text()]
        for feature, band, r in results
    ]
    _write_rows(path, ["feature", "band", "F", "df_b", "df_w", "p"], rows)


def write_comparison_csv(path: str, systems: Sequence[Tuple[str, str, MetricsReport]]) -> None:
    """One row per (method, task) under the comparison-table headers"""
    rows = []
    for method, task, report in systems:
        values = report.table_row()
        rows.append([method, task] + [_number(values[c]) for c in COMPARISON_COLUMNS[2:]])
    _write_rows(path, COMPARISON_COLUMNS, rows)


def _save_svg(fig: Figure, path: str) -> None:
    try:
        with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path"}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise ReportError(f"Cannot write {path}: {e}")
    logger.debug(f"Wrote figure {path}")


def plot_per_recording_svg(path: str, report: MetricsReport, title: str = "Epoch-wise accuracy per recording") -> None:
    if not report.per_recording:
        raise ReportError("No per-recording accuracies to plot")
    ids = [r.recording_id for r in report.per_recording]
    accuracies = [r.accuracy for r in report.per_recording]
    fig = Figure(figsize=(max(6.0, 0.3 * len(ids)), 4.0))
    ax = fig.subplots()
    ax.bar(np.arange(len(ids)), accuracies, color="tab:blue")
    ax.set_xticks(np.arange(len(ids)))
    ax.set_xticklabels(ids, rotation=90, fontsize=7)
    ax.set_ylim(0, 100)
    ax.set_ylabel("Accuracy (%)")
    ax.set_title(title)
    fig.tight_layout()
    _save_svg(fig, path)


def plot_kde_svg(path: str, curves: Mapping[str, KdeCurve], title: str) -> None:
    """One density line per group (e.g. SC and ST)"""
    if not curves:
        raise ReportError("No density curves to plot")
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.subplots()
    for name, curve in curves.items():
        ax.plot(curve.grid, curve.density, label=name)
    ax.set_xlabel("Scaled value")
    ax.set_ylabel("Density")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save_svg(fig, path)

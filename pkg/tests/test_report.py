import csv

import numpy as np
import pytest

from sleepstack.core.errors import ReportError
from sleepstack.core.metrics import RecordingResult, confusion, metrics
from sleepstack.core.report import (
    COMPARISON_COLUMNS,
    plot_kde_svg,
    plot_per_recording_svg,
    write_anova_csv,
    write_comparison_csv,
    write_confusion_csv,
    write_metrics_csv,
    write_per_recording_csv,
)
from sleepstack.core.stats import AnovaResult, kde

NAMES = ["S1", "S2", "S3", "REM", "W"]


@pytest.fixture
def report():
    results = [
        RecordingResult("SC4001", np.array([0, 1, 2, 3, 4, 4]), np.array([0, 1, 2, 3, 4, 3])),
        RecordingResult("ST7011", np.array([1, 1, 2, 4]), np.array([0, 1, 2, 4])),
    ]
    preds = np.concatenate([r.preds for r in results])
    labels = np.concatenate([r.labels for r in results])
    return metrics(confusion(preds, labels, NAMES), results, {"SC4001": "SC00", "ST7011": "ST01"})


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_metrics_csv(tmp_path, report):
    path = str(tmp_path / "metrics.csv")
    write_metrics_csv(path, report)
    rows = read_csv(path)

    assert rows[0] == ["metric", "class", "value"]
    assert rows[1] == ["Sens.", "S1", "50.000000"]
    assert [r[0] for r in rows[-5:]] == [
        "Avg Sens.",
        "Avg Spec.",
        "Epoch-Wise Acc",
        "Patient-Wise Acc",
        "Patient-Wise Acc (recordings)",
    ]
    assert float(rows[-3][2]) == pytest.approx(80.0)


def test_confusion_csv_counts_and_percentages(tmp_path, report):
    cm = confusion([0, 1, 1], [0, 1, 0], NAMES)
    counts_path = str(tmp_path / "confusion.csv")
    percent_path = str(tmp_path / "confusion_percent.csv")
    write_confusion_csv(counts_path, cm)
    write_confusion_csv(percent_path, cm, normalized=True)

    assert read_csv(counts_path)[0] == ["true\\pred"] + NAMES
    assert read_csv(counts_path)[1] == ["S1", "1", "1", "0", "0", "0"]
    assert read_csv(percent_path)[1] == ["S1", "50.00", "50.00", "0.00", "0.00", "0.00"]


def test_per_recording_csv(tmp_path, report):
    path = str(tmp_path / "per_recording.csv")
    write_per_recording_csv(path, report)
    rows = read_csv(path)
    assert rows[0] == ["recording_id", "subject_id", "subset", "accuracy"]
    assert rows[2] == ["ST7011", "ST01", "ST", "75.000000"]


def test_anova_csv(tmp_path):
    path = str(tmp_path / "anova.csv")
    write_anova_csv(path, [("mmd", "delta", AnovaResult(3.5, 1, 98, 0.064)), ("energy_sis", "gamma", AnovaResult(9e3, 1, 98, 0.0))])
    rows = read_csv(path)
    assert rows[0] == ["feature", "band", "F", "df_b", "df_w", "p"]
    assert rows[1] == ["mmd", "delta", "3.5", "1", "98", "0.064"]
    assert rows[2][-1] == "<1e-300"


def test_comparison_csv(tmp_path, report):
    path = str(tmp_path / "comparison.csv")
    write_comparison_csv(path, [("Proposed Method", "SC_TASK", report), ("IIR-MMD-DT", "SC_TASK", report)])
    rows = read_csv(path)
    assert rows[0] == COMPARISON_COLUMNS
    assert rows[1][:3] == ["Proposed Method", "SC_TASK", "50.000000"]
    assert len(rows) == 3


def test_empty_tables_are_rejected(tmp_path):
    with pytest.raises(ReportError):
        write_anova_csv(str(tmp_path / "anova.csv"), [])
    with pytest.raises(ReportError):
        write_comparison_csv(str(tmp_path / "comparison.csv"), [])


def test_per_recording_svg_is_reproducible(tmp_path, report):
    first = tmp_path / "a.svg"
    second = tmp_path / "b.svg"
    plot_per_recording_svg(str(first), report)
    plot_per_recording_svg(str(second), report)

    content = first.read_bytes()
    assert content.startswith(b"<?xml")
    assert b"<svg" in content
    assert content == second.read_bytes()


def test_kde_svg(tmp_path, rng):
    curves = {"SC": kde(rng.normal(size=100)), "ST": kde(rng.normal(1.0, 1.0, size=80))}
    path = tmp_path / "kde.svg"
    plot_kde_svg(str(path), curves, "energy_sis gamma")
    assert b"<svg" in path.read_bytes()


def test_plots_need_data(tmp_path):
    with pytest.raises(ReportError):
        plot_kde_svg(str(tmp_path / "kde.svg"), {}, "empty")
    empty = metrics(confusion([0], [0], NAMES))
    with pytest.raises(ReportError):
        plot_per_recording_svg(str(tmp_path / "bars.svg"), empty)

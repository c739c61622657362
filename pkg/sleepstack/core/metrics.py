"""
Confusion matrices and the sensitivity / specificity / accuracy report
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .errors import LengthMismatch, UsageError

logger = logging.getLogger(__name__)


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes"""

    counts: np.ndarray
    class_names: Sequence[str]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_normalized(self) -> np.ndarray:
        """Percent of each true class; all-zero rows stay zero"""
        rows = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        return np.divide(100.0 * self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)


def confusion(preds: Sequence[int], labels: Sequence[int], class_names: Sequence[str]) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise LengthMismatch(f"{preds.size} predictions for {labels.size} labels")
    k = len(class_names)
    if preds.size and (min(preds.min(), labels.min()) < 0 or max(preds.max(), labels.max()) >= k):
        raise UsageError(f"Class indices must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts=counts, class_names=list(class_names))


@dataclass
class RecordingResult:
    recording_id: str
    preds: np.ndarray
    labels: np.ndarray

    @property
    def subset(self) -> str:
        return self.recording_id[:2]

    @property
    def accuracy(self) -> float:
        return 100.0 * float(np.mean(self.preds == self.labels)) if len(self.labels) else 0.0


@dataclass
class RecordingAccuracy:
    recording_id: str
    subject_id: str
    subset: str
    accuracy: float


@dataclass
class MetricsReport:
    """All values in percent; None marks a class absent from the labels"""

    class_names: List[str]
    sensitivity: List[Optional[float]]
    specificity: List[Optional[float]]
    avg_sensitivity: float
    avg_specificity: float
    epoch_accuracy: float
    patient_accuracy: Optional[float] = None
    recording_patient_accuracy: Optional[float] = None
    per_recording: List[RecordingAccuracy] = field(default_factory=list)
    empty_classes: List[str] = field(default_factory=list)

    def table_row(self) -> Dict[str, Optional[float]]:
        """Values under the comparison-table column names"""
        return {
            "S1 Sens.": self.sensitivity[self.class_names.index("S1")] if "S1" in self.class_names else None,
            "Avg Sens.": self.avg_sensitivity,
            "Avg Spec.": self.avg_specificity,
            "Epoch-Wise Acc": self.epoch_accuracy,
            "Patient-Wise Acc": self.patient_accuracy,
        }


def metrics(
    cm: ConfusionMatrix,
    per_recording: Sequence[RecordingResult] = (),
    patient_of: Optional[Mapping[str, str]] = None,
) -> MetricsReport:
    """
    Per-class and aggregate scores from a confusion matrix

    Args:
        cm: Confusion matrix over all evaluated epochs
        per_recording: Predictions grouped by recording, for the patient-wise scores
        patient_of: recording id -> subject id

    Returns:
        The report; classes with no true epochs are left out of both macro means
    """
    counts = cm.counts.astype(np.float64)
    k = counts.shape[0]
    if counts.shape != (k, k) or k != len(cm.class_names):
        raise UsageError("Confusion matrix does not match its class names")
    total = counts.sum()
    if total == 0:
        raise UsageError("Cannot score an empty confusion matrix")

    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    diag = np.diag(counts)
    sensitivity: List[Optional[float]] = []
    specificity: List[Optional[float]] = []
    empty = []
    for c in range(k):
        if rows[c] == 0:
            sensitivity.append(None)
            specificity.append(None)
            empty.append(cm.class_names[c])
            continue
        true_negative = total - rows[c] - cols[c] + diag[c]
        false_positive = cols[c] - diag[c]
        sensitivity.append(100.0 * diag[c] / rows[c])
        negatives = true_negative + false_positive
        specificity.append(100.0 * true_negative / negatives if negatives > 0 else None)
    if empty:
        logger.warning(f"No test epochs for {', '.join(empty)}; left out of the averages")

    present_sens = [s for s in sensitivity if s is not None]
    present_spec = [s for s in specificity if s is not None]
    report = MetricsReport(
        class_names=list(cm.class_names),
        sensitivity=sensitivity,
        specificity=specificity,
        avg_sensitivity=float(np.mean(present_sens)),
        avg_specificity=float(np.mean(present_spec)) if present_spec else 100.0,
        epoch_accuracy=100.0 * float(diag.sum() / total),
        empty_classes=empty,
    )

    if per_recording:
        patient_of = patient_of or {}
        pooled: Dict[str, List[int]] = {}
        for result in per_recording:
            subject = patient_of.get(result.recording_id, result.recording_id)
            report.per_recording.append(
                RecordingAccuracy(result.recording_id, subject, result.subset, result.accuracy)
            )
            correct, seen = pooled.setdefault(subject, [0, 0])
            pooled[subject] = [
                correct + int(np.sum(result.preds == result.labels)),
                seen + len(result.labels),
            ]
        report.patient_accuracy = 100.0 * float(
            np.mean([correct / seen for correct, seen in pooled.values() if seen])
        )
        report.recording_patient_accuracy = float(np.mean([r.accuracy for r in report.per_recording]))
    return report

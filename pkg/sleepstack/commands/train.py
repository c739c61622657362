"""
Training and evaluation commands for the residual network
"""

import os
from typing import Optional

import numpy as np
from rich.console import Console

from .base import BaseCommand
from ..core.checkpoint import load_checkpoint, save_checkpoint
from ..core.epochs import build_split
from ..core.errors import UsageError
from ..core.metrics import RecordingResult, confusion, metrics
from ..core.report import (
    plot_per_recording_svg,
    write_comparison_csv,
    write_confusion_csv,
    write_metrics_csv,
    write_per_recording_csv,
)
from ..core.resnet import build_model
from ..core.seeds import make_rng
from ..core.trainer import TrainConfig, stack_epochs, train

console = Console()

CHECKPOINT_FILE = "model.ckpt"
HISTORY_FILE = "history.csv"
TRAIN_CONFIG_FILE = "train_config.json"
NETWORK_METHOD = "Proposed Method"


def write_evaluation(command: BaseCommand, out: str, prefix: str, method: str, cm, report) -> None:
    """Metrics, confusion and per-recording outputs shared by evaluate and baseline"""
    write_metrics_csv(os.path.join(out, f"{prefix}metrics.csv"), report)
    write_confusion_csv(os.path.join(out, f"{prefix}confusion.csv"), cm)
    write_confusion_csv(os.path.join(out, f"{prefix}confusion_percent.csv"), cm, normalized=True)
    write_per_recording_csv(os.path.join(out, f"{prefix}per_recording.csv"), report)
    plot_per_recording_svg(os.path.join(out, f"{prefix}per_recording.svg"), report, title=f"{method}: accuracy per recording")
    command.display_table(
        f"{method} ({command.task.value})",
        ["Class", "Sens. (%)", "Spec. (%)"],
        [[n, s, p] for n, s, p in zip(report.class_names, report.sensitivity, report.specificity)],
    )
    command.display_table(
        "Summary", ["Metric", "Value"], [[k, v] for k, v in report.table_row().items()]
    )


def score_recordings(test_epochs, predictions, class_names):
    """Confusion matrix and report over test epochs in store order"""
    labels = np.array([e.label for e in test_epochs], dtype=np.int64)
    cm = confusion(predictions, labels, class_names)
    groups = {}
    for epoch, pred in zip(test_epochs, predictions):
        groups.setdefault(epoch.recording_id, ([], [], epoch.subject_id))
        groups[epoch.recording_id][0].append(int(pred))
        groups[epoch.recording_id][1].append(epoch.label)
    per_recording = [
        RecordingResult(rid, np.array(p, dtype=np.int64), np.array(t, dtype=np.int64))
        for rid, (p, t, _) in sorted(groups.items())
    ]
    patient_of = {rid: subject for rid, (_, _, subject) in groups.items()}
    return cm, metrics(cm, per_recording, patient_of)


class TrainCommands(BaseCommand):
    """Handles network training and evaluation"""

    def train(self, store: Optional[str], manifest_path: Optional[str], out: str, dry_run: bool = False) -> int:
        def body():
            cfg = TrainConfig.from_config(self.config)
            num_classes = self.scheme.num_classes
            if dry_run:
                model = build_model(
                    num_classes,
                    make_rng(cfg.seed, "init"),
                    keep_prob=cfg.keep_prob,
                    bn_epsilon=self.config["bn_epsilon"],
                    bn_momentum=self.config["bn_momentum"],
                )
                self.display_param_report(model)
                console.print("[yellow]Dry run: no training performed[/]")
                return

            manifest = self.load_manifest(manifest_path)
            epoch_store = self.open_store(self.store_path(store, out))
            train_epochs, _ = build_split(epoch_store.epochs(manifest.recordings), manifest)
            if not train_epochs:
                raise UsageError("Manifest selects no training epochs")

            model = build_model(
                num_classes,
                make_rng(cfg.seed, "init"),
                keep_prob=cfg.keep_prob,
                bn_epsilon=self.config["bn_epsilon"],
                bn_momentum=self.config["bn_momentum"],
            )
            self.prepare_output_dir(out)
            cfg.to_json(os.path.join(out, TRAIN_CONFIG_FILE))
            model, history = train(model, train_epochs, cfg)

            save_checkpoint(model, os.path.join(out, CHECKPOINT_FILE), {"task": self.task.value})
            history.to_csv(os.path.join(out, HISTORY_FILE))
            console.print(f"[green]Wrote {os.path.join(out, CHECKPOINT_FILE)} and {HISTORY_FILE}[/]")

        return self.run(body)

    def evaluate(
        self, checkpoint: Optional[str], store: Optional[str], manifest_path: Optional[str], out: str
    ) -> int:
        """Score a checkpoint on the manifest's test recordings"""

        def body():
            checkpoint_path = checkpoint or os.path.join(out, CHECKPOINT_FILE)
            if not os.path.isfile(checkpoint_path):
                raise UsageError(f"Checkpoint not found: {checkpoint_path}")
            manifest = self.load_manifest(manifest_path)
            scheme = self.scheme
            model = load_checkpoint(checkpoint_path, num_classes=scheme.num_classes)
            epoch_store = self.open_store(self.store_path(store, out))
            _, test_epochs = build_split(epoch_store.epochs(manifest.recordings), manifest)
            if not test_epochs:
                raise UsageError("Manifest selects no test epochs")

            x, _ = stack_epochs(test_epochs)
            predictions = model.predict(x, self.config["eval_batch_size"])
            cm, report = score_recordings(test_epochs, predictions, scheme.class_names)

            self.prepare_output_dir(out)
            write_evaluation(self, out, "", NETWORK_METHOD, cm, report)
            write_comparison_csv(
                os.path.join(out, "comparison.csv"), [(NETWORK_METHOD, self.task.value, report)]
            )
            console.print(f"[green]Wrote evaluation reports to {out}[/]")

        return self.run(body)

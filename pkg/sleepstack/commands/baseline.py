"""
Baseline command: band features plus a balanced bagging tree ensemble
"""

import os
from typing import Optional

import numpy as np
from rich.console import Console

from .base import BaseCommand
from .train import NETWORK_METHOD, score_recordings, write_evaluation
from ..core.checkpoint import load_checkpoint
from ..core.epochs import build_split
from ..core.errors import UsageError
from ..core.features import extract_feature_matrix, write_feature_csv
from ..core.filters import bands_from_config, design_bank
from ..core.report import write_comparison_csv
from ..core.trainer import stack_epochs
from ..core.trees import balanced_bagging_train, predict

console = Console()

BASELINE_METHOD = "IIR-MMD-DT"
ENSEMBLE_FILE = "ensemble.json"


class BaselineCommands(BaseCommand):
    """Handles the tree-ensemble baseline"""

    def baseline(
        self,
        store: Optional[str],
        manifest_path: Optional[str],
        out: str,
        checkpoint: Optional[str] = None,
    ) -> int:
        def body():
            manifest = self.load_manifest(manifest_path)
            if checkpoint and not os.path.isfile(checkpoint):
                raise UsageError(f"Checkpoint not found: {checkpoint}")
            scheme = self.scheme
            epoch_store = self.open_store(self.store_path(store, out))
            train_epochs, test_epochs = build_split(epoch_store.epochs(manifest.recordings), manifest)
            if not train_epochs or not test_epochs:
                raise UsageError("Manifest must select both training and test epochs")

            bank = design_bank(bands_from_config(self.config["bands"], self.config["filter_order"]))
            window = self.config["mmd_window"]
            train_features = extract_feature_matrix(train_epochs, bank, window, self.threads)
            test_features = extract_feature_matrix(test_epochs, bank, window, self.threads)

            ensemble = balanced_bagging_train(
                np.stack([v.values for v in train_features]),
                np.array([v.label for v in train_features], dtype=np.int64),
                scheme.num_classes,
                n_trees=self.config["n_trees"],
                seed=self.config["seed"],
                max_depth=self.config["tree_max_depth"],
                min_leaf=self.config["tree_min_leaf"],
                threads=self.threads,
            )
            predictions = predict(ensemble, np.stack([v.values for v in test_features]))
            cm, report = score_recordings(test_epochs, predictions, scheme.class_names)

            self.prepare_output_dir(out)
            write_feature_csv(os.path.join(out, "features_train.csv"), train_features)
            write_feature_csv(os.path.join(out, "features_test.csv"), test_features)
            ensemble.save(os.path.join(out, ENSEMBLE_FILE))
            write_evaluation(self, out, "baseline_", BASELINE_METHOD, cm, report)

            systems = [(BASELINE_METHOD, self.task.value, report)]
            if checkpoint:
                model = load_checkpoint(checkpoint, num_classes=scheme.num_classes)
                x, _ = stack_epochs(test_epochs)
                _, network_report = score_recordings(
                    test_epochs, model.predict(x, self.config["eval_batch_size"]), scheme.class_names
                )
                systems.append((NETWORK_METHOD, self.task.value, network_report))
            write_comparison_csv(os.path.join(out, "comparison.csv"), systems)
            console.print(f"[green]Wrote baseline outputs to {out}[/]")

        return self.run(body)

"""
Ingestion commands: EDF recordings to an epoch store, and split manifests
"""

import csv
import os
from typing import Optional

from rich.console import Console

from .base import BaseCommand
from ..core.epochs import (
    class_count_summary,
    discover_recordings,
    ingest_directory,
    random_split_manifest,
)
from ..core.errors import MissingRecordings, UsageError
from ..core.store import EpochStore, write_epoch_store

console = Console()

COUNTS_FILE = "class_counts.csv"
DEFAULT_TEST_FRACTION = {"RS_TASK": 0.29, "SC_TASK": 0.30}


class IngestCommands(BaseCommand):
    """Handles ingestion and split commands"""

    def ingest(self, data_dir: Optional[str], manifest_path: Optional[str], out: str) -> int:
        """Parse recordings into <out>/epochs.bin plus a class-count summary"""

        def body():
            if not data_dir or not os.path.isdir(data_dir):
                raise UsageError(f"Data directory not found: {data_dir}")
            manifest = self.load_manifest(manifest_path) if manifest_path else None
            if manifest is not None:
                wanted = list(manifest.recordings)
            else:
                wanted = sorted(discover_recordings(data_dir))
                if not wanted:
                    raise MissingRecordings(f"No PSG/hypnogram pairs found in {data_dir}")

            scheme = self.scheme
            channel = self.config["channel"]
            epochs = ingest_directory(data_dir, wanted, scheme, channel, self.threads)
            self.prepare_output_dir(out)
            store_path = self.store_path(None, out)
            write_epoch_store(store_path, epochs, scheme, channel)

            rows = class_count_summary(epochs, scheme, manifest)
            with open(os.path.join(out, COUNTS_FILE), "w", encoding="utf-8", newline="") as f:
                writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()), lineterminator="\n")
                writer.writeheader()
                writer.writerows(rows)
            self.display_class_counts(rows)
            console.print(f"[green]Wrote {len(epochs)} epochs from {len(wanted)} recordings to {store_path}[/]")

        return self.run(body)

    def split(self, store: Optional[str], out: str, test_fraction: Optional[float]) -> int:
        """Write a seeded subject-independent manifest for the configured task"""

        def body():
            epoch_store = EpochStore.open(self.store_path(store, out))
            task = self.task
            fraction = test_fraction
            if fraction is None:
                fraction = self.config["test_fraction"]
            if fraction is None:
                fraction = DEFAULT_TEST_FRACTION[task.value]
            if not 0.0 < fraction < 1.0:
                raise UsageError(f"Test fraction must be in (0, 1), got {fraction}")

            manifest = random_split_manifest(
                epoch_store.recording_ids(), task, fraction, self.config["seed"]
            )
            self.prepare_output_dir(out)
            path = os.path.join(out, f"manifest_{task.value.lower()}.json")
            manifest.save(path)
            console.print(
                f"[green]Wrote {path}:[/] {len(manifest.train_recordings)} train / "
                f"{len(manifest.test_recordings)} test recordings"
            )

        return self.run(body)

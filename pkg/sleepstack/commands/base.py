"""
Base command handler for the SleepStack CLI
"""

import logging
import os
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

from rich.console import Console
from rich.table import Table

from ..core.config import Config
from ..core.epochs import LabelScheme, SplitManifest, Task
from ..core.errors import SleepStackError, UsageError
from ..core.resnet import Model
from ..core.store import EpochStore

# Create rich console for output
console = Console()
error_console = Console(stderr=True)

logger = logging.getLogger(__name__)

RUN_CONFIG_FILE = "run_config.json"
STORE_FILE = "epochs.bin"


class BaseCommand:
    """Base class for all SleepStack commands"""

    def __init__(self, config_file: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None):
        self.config_file = config_file
        self.overrides = dict(overrides or {})
        self._config: Optional[Config] = None

    @property
    def config(self) -> Config:
        # Resolved lazily so config errors surface through run()
        if self._config is None:
            self._config = Config(config_file=self.config_file, overrides=self.overrides)
        return self._config

    @property
    def scheme(self) -> LabelScheme:
        return LabelScheme.for_classes(self.config["scheme"])

    @property
    def task(self) -> Task:
        return Task.parse(self.config["task"])

    @property
    def threads(self) -> int:
        return max(1, int(self.config["threads"]))

    def run(self, action: Callable[[], None]) -> int:
        """
        Run a command body and map failures to exit codes

        Args:
            action: The command body

        Returns:
            0 on success, the error's exit code otherwise
        """
        try:
            action()
            return 0
        except SleepStackError as e:
            error_console.print(f"[bold red]Error:[/] {e}")
            logger.debug("Command failed", exc_info=True)
            return e.exit_code
        except Exception as e:
            error_console.print(f"[bold red]Error:[/] unexpected failure: {e}")
            logger.debug("Unexpected failure", exc_info=True)
            return 1

    def prepare_output_dir(self, out: str) -> str:
        """Create the output directory and echo the effective config into it"""
        try:
            os.makedirs(out, exist_ok=True)
            self.config.save(os.path.join(out, RUN_CONFIG_FILE))
        except OSError as e:
            raise UsageError(f"Cannot use output directory {out}: {e}")
        return out

    def store_path(self, store: Optional[str], out: str) -> str:
        return store or os.path.join(out, STORE_FILE)

    def open_store(self, path: str) -> EpochStore:
        store = EpochStore.open(path)
        if store.num_classes != self.scheme.num_classes:
            raise UsageError(
                f"Epoch store {path} holds {store.num_classes}-class labels, "
                f"this run uses --scheme {self.scheme.num_classes}"
            )
        return store

    def load_manifest(self, path: Optional[str]) -> SplitManifest:
        if not path:
            raise UsageError("A split manifest is required (--manifest)")
        return SplitManifest.load(path)

    def display_table(
        self, title: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]
    ) -> None:
        table = Table(title=title)
        for i, column in enumerate(columns):
            table.add_column(column, style="cyan" if i == 0 else "green")
        for row in rows:
            table.add_row(*[_cell(value) for value in row])
        console.print(table)

    def display_class_counts(self, rows: List[Dict[str, Any]]) -> None:
        if not rows:
            return
        columns = list(rows[0].keys())
        self.display_table("Epochs per class", columns, [[r[c] for c in columns] for r in rows])

    def display_param_report(self, model: Model) -> int:
        report = model.param_report()
        total = sum(count for _, count in report)
        rows = [[name, count] for name, count in report if count]
        self.display_table("Parameters", ["Layer", "Params"], rows)
        body, shortcut = model.spec.conv_counts()
        console.print(
            f"Total parameters: [bold]{total}[/] "
            f"({body} kernel-{_body_kernel(model)} convolutions, {shortcut} shortcut convolutions)"
        )
        return total


def _body_kernel(model: Model) -> int:
    kernels = {r.kernel for r in model.spec.rows if r.kind == "Conv1D" and r.kernel and r.kernel > 1}
    return max(kernels) if kernels else 1


def _cell(value: Any) -> str:
    if value is None:
        return "[italic]n/a[/]"
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)

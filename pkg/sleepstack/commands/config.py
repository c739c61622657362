"""
Configuration commands for the SleepStack CLI
"""

import os

from rich.console import Console
from rich.table import Table

from .base import BaseCommand
from ..core.config import write_default_config
from ..core.errors import UsageError

console = Console()


class ConfigCommands(BaseCommand):
    """Handles configuration commands"""

    def show_config(self) -> int:
        """Show the effective configuration and where each value came from"""

        def body():
            table = Table(title="SleepStack Configuration")
            table.add_column("Setting", style="cyan")
            table.add_column("Value", style="green")
            table.add_column("Source", style="yellow")

            sources = self.config.sources()
            for key, value in sorted(self.config.as_dict().items()):
                if isinstance(value, bool):
                    value_str = "[green]Yes[/]" if value else "[red]No[/]"
                elif value is None:
                    value_str = "[italic]None[/]"
                else:
                    value_str = str(value)
                table.add_row(key, value_str, sources[key])

            console.print(table)

        return self.run(body)

    def init_config(self, path: str, force: bool = False) -> int:
        """Write the default configuration as a JSON template"""

        def body():
            if os.path.exists(path) and not force:
                raise UsageError(f"{path} already exists; pass --force to overwrite")
            try:
                write_default_config(path)
            except OSError as e:
                raise UsageError(f"Cannot write {path}: {e}")
            console.print(f"[green]Created configuration template:[/] {path}")

        return self.run(body)

"""
Information commands for the SleepStack CLI
"""

from rich.console import Console
from rich.panel import Panel

from .base import BaseCommand
from .. import __version__
from ..core.epochs import LabelScheme
from ..core.hypnogram import STAGE_STRINGS
from ..core.resnet import build_model
from ..core.seeds import make_rng

console = Console()


class InfoCommands(BaseCommand):
    """Handles informational commands"""

    def show_architecture(self) -> int:
        """Parameter report of the network for the configured scheme"""

        def body():
            num_classes = self.scheme.num_classes
            console.print(Panel(f"[bold]Residual network, {num_classes} classes[/]", style="blue"))
            model = build_model(num_classes, make_rng(self.config["seed"], "init"))
            self.display_param_report(model)

        return self.run(body)

    def show_stages(self) -> int:
        """Annotation strings and their class index under both schemes"""
        six = LabelScheme.six_stage()
        five = LabelScheme.five_stage()
        rows = []
        for text, stage in STAGE_STRINGS.items():
            rows.append(
                [
                    text,
                    stage.value,
                    _describe(six, stage),
                    _describe(five, stage),
                ]
            )
        self.display_table("Sleep stages", ["Annotation", "Stage", "6-stage", "5-stage"], rows)
        return 0

    def show_version(self) -> int:
        console.print(f"SleepStack version {__version__}")
        return 0


def _describe(scheme: LabelScheme, stage) -> str:
    index = scheme.mapping[stage]
    if index is None:
        return "dropped"
    return f"{index} ({scheme.class_names[index]})"

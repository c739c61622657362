"""
Main CLI entrypoint for the SleepStack toolkit
"""

import logging
from typing import Any, Dict, Optional

import typer
from rich.console import Console
from rich.logging import RichHandler

from .commands.analyze import AnalyzeCommands
from .commands.baseline import BaselineCommands
from .commands.config import ConfigCommands
from .commands.info import InfoCommands
from .commands.ingest import IngestCommands
from .commands.train import TrainCommands

app = typer.Typer(
    name="sleepstack",
    help="Sleep stage classification from single-channel EEG",
    add_completion=False,
)

info_app = typer.Typer(help="Information commands")
config_app = typer.Typer(help="Configuration commands")

app.add_typer(info_app, name="info")
app.add_typer(config_app, name="config")

console = Console()
error_console = Console(stderr=True)

OUT_HELP = "Output directory"
STORE_HELP = "Epoch store (default: <out>/epochs.bin)"
SCHEME_HELP = "Label scheme: 6 stages or 5 with S3/S4 merged"
TASK_HELP = "Experiment task: rs (SC+ST) or sc (SC only)"


def setup_logging(verbose: bool) -> None:
    """Route the package loggers through rich"""
    logger = logging.getLogger("sleepstack")
    logger.handlers.clear()
    logger.addHandler(RichHandler(console=error_console, show_path=False, show_time=False))
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    logger.propagate = False


def _settings(ctx: typer.Context, **overrides: Any) -> Dict[str, Any]:
    return {"config_file": (ctx.obj or {}).get("config_file"), "overrides": overrides}


def get_ingest_commands(ctx: typer.Context, **overrides: Any) -> IngestCommands:
    """Get the ingestion commands handler"""
    return IngestCommands(**_settings(ctx, **overrides))


def get_train_commands(ctx: typer.Context, **overrides: Any) -> TrainCommands:
    """Get the training commands handler"""
    return TrainCommands(**_settings(ctx, **overrides))


def get_baseline_commands(ctx: typer.Context, **overrides: Any) -> BaselineCommands:
    """Get the baseline commands handler"""
    return BaselineCommands(**_settings(ctx, **overrides))


def get_analyze_commands(ctx: typer.Context, **overrides: Any) -> AnalyzeCommands:
    """Get the analysis commands handler"""
    return AnalyzeCommands(**_settings(ctx, **overrides))


def get_info_commands(ctx: typer.Context, **overrides: Any) -> InfoCommands:
    """Get the information commands handler"""
    return InfoCommands(**_settings(ctx, **overrides))


def get_config_commands(ctx: typer.Context) -> ConfigCommands:
    """Get the configuration commands handler"""
    return ConfigCommands(**_settings(ctx))


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    version: bool = typer.Option(False, "--version", help="Show version and exit"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
    config: Optional[str] = typer.Option(None, "--config", help="JSON config file (overrides SLEEPSTACK_* env)"),
):
    """
    SleepStack - sleep stage classification from single-channel EEG
    """
    setup_logging(verbose)
    ctx.obj = {"config_file": config}

    if version:
        from . import __version__
        console.print(f"SleepStack version {__version__}")
        raise typer.Exit(0)

    if ctx.invoked_subcommand is None:
        console.print(ctx.get_help())
        raise typer.Exit(2)


@app.command()
def ingest(
    ctx: typer.Context,
    data_dir: Optional[str] = typer.Option(None, "--data-dir", help="Directory of *-PSG.edf and hypnogram files"),
    manifest: Optional[str] = typer.Option(None, "--manifest", help="Split manifest selecting recordings"),
    scheme: Optional[int] = typer.Option(None, "--scheme", help=SCHEME_HELP),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker threads"),
    out: str = typer.Option("out", "--out", help=OUT_HELP),
):
    """Parse EDF recordings into an epoch store"""
    cmd = get_ingest_commands(ctx, scheme=scheme, threads=threads)
    exit_code = cmd.ingest(data_dir, manifest, out)
    raise typer.Exit(code=exit_code)


@app.command()
def split(
    ctx: typer.Context,
    store: Optional[str] = typer.Option(None, "--store", help=STORE_HELP),
    task: Optional[str] = typer.Option(None, "--task", help=TASK_HELP),
    seed: Optional[int] = typer.Option(None, "--seed", help="Run seed"),
    test_fraction: Optional[float] = typer.Option(None, "--test-fraction", help="Share of subjects held out"),
    out: str = typer.Option("out", "--out", help=OUT_HELP),
):
    """Write a seeded subject-independent split manifest"""
    cmd = get_ingest_commands(ctx, task=task, seed=seed)
    exit_code = cmd.split(store, out, test_fraction)
    raise typer.Exit(code=exit_code)


@app.command()
def train(
    ctx: typer.Context,
    store: Optional[str] = typer.Option(None, "--store", help=STORE_HELP),
    manifest: Optional[str] = typer.Option(None, "--manifest", help="Split manifest"),
    scheme: Optional[int] = typer.Option(None, "--scheme", help=SCHEME_HELP),
    task: Optional[str] = typer.Option(None, "--task", help=TASK_HELP),
    seed: Optional[int] = typer.Option(None, "--seed", help="Run seed"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker threads"),
    out: str = typer.Option("out", "--out", help=OUT_HELP),
    dry_run: bool = typer.Option(False, "--dry-run", help="Build the model and print its parameters only"),
):
    """Train the residual network"""
    cmd = get_train_commands(ctx, scheme=scheme, task=task, seed=seed, threads=threads)
    exit_code = cmd.train(store, manifest, out, dry_run=dry_run)
    raise typer.Exit(code=exit_code)


@app.command()
def evaluate(
    ctx: typer.Context,
    checkpoint: Optional[str] = typer.Option(None, "--checkpoint", help="Checkpoint (default: <out>/model.ckpt)"),
    store: Optional[str] = typer.Option(None, "--store", help=STORE_HELP),
    manifest: Optional[str] = typer.Option(None, "--manifest", help="Split manifest"),
    scheme: Optional[int] = typer.Option(None, "--scheme", help=SCHEME_HELP),
    task: Optional[str] = typer.Option(None, "--task", help=TASK_HELP),
    out: str = typer.Option("out", "--out", help=OUT_HELP),
):
    """Evaluate a checkpoint on the test recordings"""
    cmd = get_train_commands(ctx, scheme=scheme, task=task)
    exit_code = cmd.evaluate(checkpoint, store, manifest, out)
    raise typer.Exit(code=exit_code)


@app.command()
def baseline(
    ctx: typer.Context,
    store: Optional[str] = typer.Option(None, "--store", help=STORE_HELP),
    manifest: Optional[str] = typer.Option(None, "--manifest", help="Split manifest"),
    scheme: Optional[int] = typer.Option(None, "--scheme", help=SCHEME_HELP),
    task: Optional[str] = typer.Option(None, "--task", help=TASK_HELP),
    seed: Optional[int] = typer.Option(None, "--seed", help="Run seed"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker threads"),
    checkpoint: Optional[str] = typer.Option(None, "--checkpoint", help="Network checkpoint to compare against"),
    out: str = typer.Option("out", "--out", help=OUT_HELP),
):
    """Train and evaluate the band-feature tree ensemble"""
    cmd = get_baseline_commands(ctx, scheme=scheme, task=task, seed=seed, threads=threads)
    exit_code = cmd.baseline(store, manifest, out, checkpoint)
    raise typer.Exit(code=exit_code)


@app.command()
def analyze(
    ctx: typer.Context,
    store: Optional[str] = typer.Option(None, "--store", help=STORE_HELP),
    scheme: Optional[int] = typer.Option(None, "--scheme", help=SCHEME_HELP),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker threads"),
    out: str = typer.Option("out", "--out", help=OUT_HELP),
):
    """Compare SC and ST band features (ANOVA and densities)"""
    cmd = get_analyze_commands(ctx, scheme=scheme, threads=threads)
    exit_code = cmd.analyze(store, out)
    raise typer.Exit(code=exit_code)


# Info commands
@info_app.command("arch")
def info_arch(
    ctx: typer.Context,
    scheme: Optional[int] = typer.Option(None, "--scheme", help=SCHEME_HELP),
):
    """Show the network's per-layer parameter counts"""
    cmd = get_info_commands(ctx, scheme=scheme)
    exit_code = cmd.show_architecture()
    raise typer.Exit(code=exit_code)


@info_app.command("stages")
def info_stages(ctx: typer.Context):
    """Show stage annotations and their class indices"""
    cmd = get_info_commands(ctx)
    exit_code = cmd.show_stages()
    raise typer.Exit(code=exit_code)


@info_app.command("version")
def info_version(ctx: typer.Context):
    """Show the SleepStack version"""
    cmd = get_info_commands(ctx)
    exit_code = cmd.show_version()
    raise typer.Exit(code=exit_code)


# Config commands
@config_app.command("show")
def config_show(ctx: typer.Context):
    """Show the effective configuration"""
    cmd = get_config_commands(ctx)
    exit_code = cmd.show_config()
    raise typer.Exit(code=exit_code)


@config_app.command("init")
def config_init(
    ctx: typer.Context,
    path: str = typer.Argument("sleepstack.json", help="Where to write the template"),
    force: bool = typer.Option(False, "--force", help="Overwrite an existing file"),
):
    """Write the default configuration as a JSON template"""
    cmd = get_config_commands(ctx)
    exit_code = cmd.init_config(path, force=force)
    raise typer.Exit(code=exit_code)

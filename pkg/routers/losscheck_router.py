from typing import Optional

import typer
from rich import print as pprint
from rich.table import Table

from services.losscheck_service import run_losscheck

from . import drop_none, pipeline_config


def losscheck(
    ctx: typer.Context,
    points: int = typer.Option(100, "--points", min=1, help="Random points per check"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Random seed (default from config)"),
):
    """Verify masking, disentanglement and gradients of the training loss."""
    config = pipeline_config(ctx, drop_none({"run": {"seed": seed}}))
    results = run_losscheck(points, config.run.seed)

    table = Table(title="Loss checks")
    table.add_column("check")
    table.add_column("trials", justify="right")
    table.add_column("result")
    table.add_column("detail")
    for r in results:
        table.add_row(r.name, str(r.trials), "[green]pass[/green]" if r.passed else "[red]FAIL[/red]", r.detail)
    pprint(table)
    if not all(r.passed for r in results):
        raise typer.Exit(code=1)

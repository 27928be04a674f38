from pathlib import Path

import typer

from services.report_service import read_eval_outputs, render_report


def report(
    eval_dir: Path = typer.Option(..., "--eval-dir", exists=True, file_okay=False, help="Output of eval"),
):
    """Print the metrics of a previous evaluation."""
    rows, summary = read_eval_outputs(str(eval_dir))
    render_report(rows, summary)

import asyncio
from pathlib import Path

import typer

from services.dataset_service import read_dataset, read_predictions
from services.eval_service import evaluate
from services.report_service import write_eval_outputs

from . import pipeline_config


def evaluate_command(
    ctx: typer.Context,
    dataset: Path = typer.Option(..., "--dataset", exists=True, file_okay=False, help="Ground-truth dataset"),
    predictions: Path = typer.Option(..., "--predictions", exists=True, dir_okay=False, help="Predictions JSONL"),
    out: Path = typer.Option(..., "--out", file_okay=False, help="Output directory"),
    class_agnostic: bool = typer.Option(False, "--class-agnostic", help="Skip the per-category rows"),
):
    """2D, bird's-eye-view and top-view heatmap metrics of 3D predictions."""
    config = pipeline_config(ctx, {"eval": {"class_agnostic": True}} if class_agnostic else None)
    frames, _ = read_dataset(str(dataset), load_rasters=False)
    report = asyncio.run(evaluate(frames, read_predictions(str(predictions)), config.eval, config.heatmap,
                                  config.run.workers))
    write_eval_outputs(report, str(out))

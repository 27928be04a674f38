import asyncio
import logging
import os
from pathlib import Path
from typing import Optional

import typer

from common import DETECTIONS_FILE, PREDICTIONS_FILE
from models.dataset_model import DatasetManifest
from services.datagen_service import synthesize
from services.dataset_service import write_dataset, write_detections, write_predictions

from . import drop_none, pipeline_config

logger = logging.getLogger(__name__)

GROUND_TRUTH_DIR = "ground_truth"
ANNOTATED_DIR = "annotated"


def synth(
    ctx: typer.Context,
    out: Path = typer.Option(..., "--out", file_okay=False, help="Output directory"),
    frames: int = typer.Option(10, "--frames", min=0, help="Number of scenes"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Random seed (default from config)"),
    render: bool = typer.Option(False, "--render", help="Also render flat-shaded rasters"),
):
    """Generate synthetic scenes, their range-limited annotations and stand-in model outputs."""
    config = pipeline_config(ctx, drop_none({"run": {"seed": seed}}))
    run_seed = config.run.seed
    run = asyncio.run(synthesize(config.datagen, frames, run_seed, config.run.workers, render))

    base = DatasetManifest.from_priors(config.datagen.scene.priors()).with_provenance(
        "synth",
        {"frames": frames, "render": render, "datagen": config.datagen.model_dump(mode="json")},
        run_seed,
    )
    unannotated = sorted(c.name for c in config.datagen.scene.categories if not c.annotated_3d)
    annotated = base.with_provenance(
        "annotation_cutoff",
        {"max_range": config.datagen.annotation_cutoff, "removed_categories": unannotated},
    )
    order = [f.id for f in run.ground_truth]
    write_dataset(run.ground_truth, base, os.path.join(out, GROUND_TRUTH_DIR))
    write_dataset(run.annotated, annotated, os.path.join(out, ANNOTATED_DIR))
    write_detections(os.path.join(out, DETECTIONS_FILE), run.detections, order)
    write_predictions(os.path.join(out, PREDICTIONS_FILE), run.predictions, order)
    logger.info("synthetic run written to %s", out)

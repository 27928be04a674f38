import asyncio
import logging
from pathlib import Path
from typing import Optional, Tuple

import typer

from models.annotation_model import Frame
from models.config_model import ZoomShiftParams
from services.augment_service import augment_frame, draw_params, emulated_depth, vanilla_reprojection_error
from services.datagen_service import frame_rng
from services.dataset_service import read_dataset, write_dataset
from utils.work_queue import map_frames

from . import drop_none, pipeline_config

logger = logging.getLogger(__name__)

AUGMENT_STREAM = "augment"


def augment(
    ctx: typer.Context,
    dataset: Path = typer.Option(..., "--dataset", exists=True, file_okay=False, help="Input dataset"),
    out: Path = typer.Option(..., "--out", file_okay=False, help="Output dataset directory"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Random seed (default from config)"),
):
    """Zoom and shift every frame with a virtual camera that keeps the 3D labels valid."""
    config = pipeline_config(ctx, drop_none({"run": {"seed": seed}}))
    run_seed = config.run.seed
    frames, manifest = read_dataset(str(dataset))

    def run(frame: Frame) -> Tuple[Frame, ZoomShiftParams, float]:
        params = draw_params(config.augment, frame_rng(run_seed, frame.id, AUGMENT_STREAM), frame.intrinsics)
        return (augment_frame(frame, params, config.augment.visibility_threshold), params,
                vanilla_reprojection_error(frame, params))

    results = asyncio.run(map_frames(run, frames, config.run.workers))
    augmented = [f for f, _, _ in results]
    for frame, (_, params, _) in zip(frames, results):
        depths = [a.cuboid.center.z for a in frame.annotations if a.cuboid is not None]
        if depths:
            logger.debug("frame %s: scale %.3f, farthest object looks %.1f m away instead of %.1f m",
                         frame.id, params.scale, emulated_depth(max(depths), params.scale), max(depths))
    dropped = sum(len(f.annotations) for f in frames) - sum(len(f.annotations) for f in augmented)
    logger.info("augmented %d frames (%s scale bounds), %d annotations left the image",
                len(frames), config.augment.scale_bounds.mode, dropped)
    worst = max((e for _, _, e in results), default=0.0)
    logger.info("a plain 2D zoom would misplace projected centers by up to %.1f px", worst)

    manifest = manifest.with_provenance(
        "augment",
        {
            "scale_bounds": config.augment.scale_bounds.model_dump(mode="json"),
            "scale_mode": config.augment.scale_bounds.mode,
            "shift_fraction": config.augment.shift_fraction,
            "visibility_threshold": config.augment.visibility_threshold,
            "params": {f.id: p.model_dump(mode="json") for f, (_, p, _) in zip(frames, results)},
            "vanilla_reprojection_error_px": {f.id: e for f, (_, _, e) in zip(frames, results)},
        },
        run_seed,
    )
    write_dataset(augmented, manifest, str(out))

import asyncio
import logging
import os
from pathlib import Path
from typing import Optional

import typer

from services.dataset_service import read_dataset, read_detections, write_dataset
from services.spl_service import fuse_dataset

from . import drop_none, pipeline_config

logger = logging.getLogger(__name__)


def fuse(
    ctx: typer.Context,
    dataset: Path = typer.Option(..., "--dataset", exists=True, file_okay=False, help="3D-annotated dataset"),
    detections: Path = typer.Option(..., "--detections", exists=True, dir_okay=False, help="2D detections JSONL"),
    out: Path = typer.Option(..., "--out", file_okay=False, help="Output dataset directory"),
    iou_threshold: Optional[float] = typer.Option(None, "--iou-threshold", help="Deduplication IoU threshold"),
):
    """Add 2D detections that no 3D annotation explains as semi-pseudo-labels."""
    config = pipeline_config(ctx, drop_none({"spl": {"iou_threshold": iou_threshold}}))
    frames, manifest = read_dataset(str(dataset))
    by_frame = read_detections(str(detections))
    unknown = sorted(set(by_frame) - {f.id for f in frames})
    if unknown:
        logger.warning("%d detection records reference unknown frames, ignored (first: %s)", len(unknown), unknown[0])

    fused, summary = asyncio.run(fuse_dataset(
        frames, by_frame, config.spl.iou_threshold, config.spl.class_map, config.run.workers))
    manifest = manifest.with_provenance("fuse", {
        "iou_threshold": config.spl.iou_threshold,
        "class_map": dict(sorted(config.spl.class_map.items())),
        "detections": os.path.basename(str(detections)),
        "added": summary.added,
        "filtered": summary.filtered,
    })
    write_dataset(fused, manifest, str(out))

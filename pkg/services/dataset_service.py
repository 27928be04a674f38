"""
Dataset directories on disk:

    manifest.json      DatasetManifest (schema version, categories, provenance)
    frames.jsonl       one FrameRecord per line, in frame order
    rasters/<id>.ppm   optional 8-bit RGB images referenced by the records

JSON is written with sorted keys, compact separators and floats rounded to 9
significant digits, so identical inputs give identical bytes. Detection and
prediction files are JSONL keyed by frame id.
"""

import json
import logging
import os
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Type, TypeVar

import numpy as np
from PIL import Image
from pydantic import BaseModel, ValidationError

from common import FRAMES_FILE, MANIFEST_FILE, RASTER_DIR
from models.annotation_model import Annotation, Detection2D, Frame, Raster
from models.dataset_model import DatasetManifest, DetectionRecord, FrameRecord, PredictionRecord
from models.errors import DatasetError, MalformedRecord, MissingRaster
from services.migrations.manager import migration_manager

logger = logging.getLogger(__name__)

R = TypeVar("R", bound=BaseModel)


# ========== encoding ==========

def round_floats(value: Any) -> Any:
    if isinstance(value, float):
        return float(f"{value:.9g}")
    if isinstance(value, dict):
        return {k: round_floats(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v) for v in value]
    return value


def dumps_record(data: Any) -> str:
    return json.dumps(round_floats(data), sort_keys=True, separators=(",", ":"), allow_nan=False)


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise DatasetError(f"cannot write file: {e.strerror or e}", path) from e


def _read_lines(path: str) -> Iterator[Tuple[int, str]]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                if line.strip():
                    yield line_number, line
    except FileNotFoundError as e:
        raise DatasetError("file not found", path) from e
    except OSError as e:
        raise DatasetError(f"cannot read file: {e.strerror or e}", path) from e


def _parse_line(line: str, path: str, line_number: int) -> Dict[str, Any]:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as e:
        raise MalformedRecord(f"invalid JSON ({e.msg})", path, line_number) from e
    if not isinstance(data, dict):
        raise MalformedRecord("record is not a JSON object", path, line_number)
    return data


def _validate(model: Type[R], data: Dict[str, Any], path: str, line_number: int) -> R:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "record"
        raise MalformedRecord(f"{where}: {first['msg']}", path, line_number) from e


# ========== rasters ==========

def raster_path(frame_id: str) -> str:
    if not frame_id or "/" in frame_id or "\\" in frame_id or frame_id in (".", ".."):
        raise DatasetError(f"frame id {frame_id!r} cannot name a raster file")
    return f"{RASTER_DIR}/{frame_id}.ppm"


def write_ppm(raster: Raster, path: str) -> None:
    pixels = np.clip(np.round(raster.values * 255.0), 0, 255).astype(np.uint8)
    try:
        Image.fromarray(pixels).save(path, format="PPM")
    except OSError as e:
        raise DatasetError(f"cannot write raster: {e}", path) from e


def read_ppm(path: str) -> Raster:
    with Image.open(path) as image:
        pixels = np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0
    height, width = pixels.shape[:2]
    return Raster(width=width, height=height, values=pixels)


# ========== datasets ==========

def write_dataset(frames: Sequence[Frame], manifest: DatasetManifest, path: str) -> DatasetManifest:
    """Write a dataset directory; returns the manifest as written (frame count filled in)."""
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise DatasetError(f"cannot create dataset directory: {e.strerror or e}", path) from e
    manifest = manifest.model_copy(update={"frame_count": len(frames)})
    lines = []
    for frame in frames:
        relative = None
        if frame.raster is not None:
            relative = raster_path(frame.id)
            os.makedirs(os.path.join(path, RASTER_DIR), exist_ok=True)
            write_ppm(frame.raster, os.path.join(path, relative))
        record = FrameRecord(id=frame.id, camera=frame.camera, intrinsics=frame.intrinsics,
                             raster=relative, annotations=frame.annotations)
        lines.append(dumps_record(record.model_dump(mode="json")) + "\n")
    _write_text(os.path.join(path, FRAMES_FILE), "".join(lines))
    _write_text(os.path.join(path, MANIFEST_FILE),
                json.dumps(round_floats(manifest.model_dump(mode="json")), sort_keys=True, indent=2) + "\n")
    logger.info("wrote %d frames to %s", len(frames), path)
    return manifest


def read_manifest(path: str) -> Tuple[DatasetManifest, int]:
    """Manifest upgraded to the current schema, plus the version found on disk."""
    manifest_path = os.path.join(path, MANIFEST_FILE)
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            text = f.read()
    except FileNotFoundError as e:
        raise DatasetError("manifest not found", manifest_path) from e
    except OSError as e:
        raise DatasetError(f"cannot read manifest: {e.strerror or e}", manifest_path) from e
    data = _parse_line(text, manifest_path, 1)
    version = migration_manager.check_version(data.get("schema_version"), manifest_path)
    data = migration_manager.migrate_manifest(data, version)
    try:
        return DatasetManifest.model_validate(data), version
    except ValidationError as e:
        raise DatasetError(f"invalid manifest: {e.errors()[0]['msg']}", manifest_path) from e


def read_dataset(path: str, load_rasters: bool = True) -> Tuple[List[Frame], DatasetManifest]:
    manifest, version = read_manifest(path)
    frames_path = os.path.join(path, FRAMES_FILE)
    frames: List[Frame] = []
    seen = set()
    for line_number, line in _read_lines(frames_path):
        data = migration_manager.migrate_frame(_parse_line(line, frames_path, line_number), version)
        record = _validate(FrameRecord, data, frames_path, line_number)
        if record.id in seen:
            raise MalformedRecord(f"duplicate frame id {record.id!r}", frames_path, line_number)
        seen.add(record.id)
        raster = None
        if record.raster is not None and load_rasters:
            full = os.path.join(path, record.raster)
            if not os.path.isfile(full):
                raise MissingRaster(f"frame {record.id}: raster {record.raster} not found", full)
            raster = read_ppm(full)
        frames.append(Frame(id=record.id, camera=record.camera, intrinsics=record.intrinsics,
                            raster=raster, annotations=record.annotations))
    if len(frames) != manifest.frame_count:
        raise DatasetError(f"manifest declares {manifest.frame_count} frames, found {len(frames)}", frames_path)
    if version != manifest.schema_version:
        logger.info("upgraded %s from schema version %d to %d", path, version, manifest.schema_version)
    logger.info("read %d frames from %s", len(frames), path)
    return frames, manifest


# ========== detections and predictions ==========

def _write_keyed(path: str, records: Sequence[BaseModel]) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    _write_text(path, "".join(dumps_record(r.model_dump(mode="json")) + "\n" for r in records))


def _read_keyed(path: str, model: Type[R]) -> List[Tuple[int, R]]:
    out = []
    seen = set()
    for line_number, line in _read_lines(path):
        record = _validate(model, _parse_line(line, path, line_number), path, line_number)
        if record.frame_id in seen:
            raise MalformedRecord(f"duplicate frame id {record.frame_id!r}", path, line_number)
        seen.add(record.frame_id)
        out.append((line_number, record))
    return out


def write_detections(path: str, detections: Mapping[str, Sequence[Detection2D]],
                     order: Optional[Sequence[str]] = None) -> None:
    ids = list(order) if order is not None else sorted(detections)
    _write_keyed(path, [DetectionRecord(frame_id=i, detections=list(detections.get(i, ()))) for i in ids])


def read_detections(path: str) -> Dict[str, List[Detection2D]]:
    return {r.frame_id: r.detections for _, r in _read_keyed(path, DetectionRecord)}


def write_predictions(path: str, predictions: Mapping[str, Sequence[Annotation]],
                      order: Optional[Sequence[str]] = None) -> None:
    ids = list(order) if order is not None else sorted(predictions)
    _write_keyed(path, [PredictionRecord(frame_id=i, predictions=list(predictions.get(i, ()))) for i in ids])


def read_predictions(path: str) -> Dict[str, List[Annotation]]:
    return {r.frame_id: r.predictions for _, r in _read_keyed(path, PredictionRecord)}

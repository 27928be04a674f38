"""
Evaluation outputs:

    metrics.csv            one row per (category, band, space)
    heatmap.csv            one row per heatmap cell
    heatmap_precision.ppm  colour-coded grids, far forward at the top
    heatmap_recall.ppm
    summary.json           totals and the class-agnostic headline numbers
"""

import csv
import json
import logging
import math
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image
from rich.console import Console
from rich.table import Table

from models.eval_model import EvalReport, HeatmapGrid
from models.errors import DatasetError
from services.dataset_service import round_floats

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
HEATMAP_FILE = "heatmap.csv"
PRECISION_IMAGE = "heatmap_precision.ppm"
RECALL_IMAGE = "heatmap_recall.ppm"
SUMMARY_FILE = "summary.json"

METRIC_COLUMNS = ["category", "band", "space", "auc", "auc_undefined", "precision", "recall",
                  "tp", "fp", "fn", "n_gt", "n_pred"]
HEATMAP_COLUMNS = ["row", "col", "longitudinal_min", "longitudinal_max", "lateral_min", "lateral_max",
                   "blank", "tp_recall", "tp_precision", "fp", "fn", "precision", "recall"]

UNDEFINED_COLOUR = (128, 128, 128)
BLANK_COLOUR = (0, 0, 0)
CELL_PIXELS = 16


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "" if math.isnan(value) else f"{value:.9g}"
    return str(value)


def _write_csv(path: str, columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row[c]) for c in columns])
    except OSError as e:
        raise DatasetError(f"cannot write file: {e.strerror or e}", path) from e


def heatmap_rows(grid: HeatmapGrid) -> List[Dict[str, Any]]:
    c = grid.config
    rows = []
    for r in range(c.rows):
        for col in range(c.cols):
            rows.append({
                "row": r,
                "col": col,
                "longitudinal_min": c.longitudinal_min + r * c.cell_longitudinal,
                "longitudinal_max": c.longitudinal_min + (r + 1) * c.cell_longitudinal,
                "lateral_min": -c.lateral_extent + col * c.cell_lateral,
                "lateral_max": -c.lateral_extent + (col + 1) * c.cell_lateral,
                "blank": bool(grid.blank[r, col]),
                "tp_recall": int(grid.tp_recall[r, col]),
                "tp_precision": int(grid.tp_precision[r, col]),
                "fp": int(grid.fp[r, col]),
                "fn": int(grid.fn[r, col]),
                "precision": float(grid.precision[r, col]),
                "recall": float(grid.recall[r, col]),
            })
    return rows


def ramp(value: float) -> Tuple[int, int, int]:
    """0 red, 0.5 yellow, 1 green, linear in between."""
    v = min(1.0, max(0.0, value))
    if v <= 0.5:
        return 255, int(round(255 * 2 * v)), 0
    return int(round(255 * 2 * (1.0 - v))), 255, 0


def heatmap_image(values: np.ndarray, blank: np.ndarray, cell_pixels: int = CELL_PIXELS) -> np.ndarray:
    rows, cols = values.shape
    cells = np.zeros((rows, cols, 3), dtype=np.uint8)
    for r in range(rows):
        for c in range(cols):
            if blank[r, c]:
                cells[r, c] = BLANK_COLOUR
            elif math.isnan(values[r, c]):
                cells[r, c] = UNDEFINED_COLOUR
            else:
                cells[r, c] = ramp(float(values[r, c]))
    # row 0 is the rearmost band; put the far forward range at the top
    cells = cells[::-1]
    return np.repeat(np.repeat(cells, cell_pixels, axis=0), cell_pixels, axis=1)


def summary_data(report: EvalReport) -> Dict[str, Any]:
    headline = {}
    for space in ("2d", "bev"):
        row = report.row("all", "all", space)
        headline[space] = {k: row[k] for k in ("auc", "auc_undefined", "precision", "recall")}
    return {
        "frames": report.frames,
        "n_gt": report.n_gt,
        "n_pred": report.n_pred,
        "headline": headline,
        "heatmap": {
            "total_precision": report.heatmap.total_precision,
            "total_recall": report.heatmap.total_recall,
            "overflow": dict(report.heatmap.overflow),
        },
        "unknown_frames": list(report.unknown_frames),
    }


def write_eval_outputs(report: EvalReport, out_dir: str) -> None:
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise DatasetError(f"cannot create output directory: {e.strerror or e}", out_dir) from e
    _write_csv(os.path.join(out_dir, METRICS_FILE), METRIC_COLUMNS, report.rows)
    _write_csv(os.path.join(out_dir, HEATMAP_FILE), HEATMAP_COLUMNS, heatmap_rows(report.heatmap))
    grid = report.heatmap
    for name, values in ((PRECISION_IMAGE, grid.precision), (RECALL_IMAGE, grid.recall)):
        Image.fromarray(heatmap_image(values, grid.blank)).save(os.path.join(out_dir, name), format="PPM")
    summary_path = os.path.join(out_dir, SUMMARY_FILE)
    try:
        with open(summary_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(round_floats(summary_data(report)), sort_keys=True, indent=2) + "\n")
    except OSError as e:
        raise DatasetError(f"cannot write file: {e.strerror or e}", summary_path) from e
    logger.info("wrote evaluation outputs to %s", out_dir)


# ========== report ==========

def _parse(value: str) -> Any:
    if value in ("true", "false"):
        return value == "true"
    if value == "":
        return None
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def read_eval_outputs(eval_dir: str) -> Tuple[List[Dict[str, Any]], Dict[str, Any]]:
    metrics_path = os.path.join(eval_dir, METRICS_FILE)
    summary_path = os.path.join(eval_dir, SUMMARY_FILE)
    try:
        with open(metrics_path, "r", encoding="utf-8", newline="") as f:
            rows = [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(f)]
        with open(summary_path, "r", encoding="utf-8") as f:
            summary = json.load(f)
    except FileNotFoundError as e:
        raise DatasetError("evaluation output not found", e.filename) from e
    except json.JSONDecodeError as e:
        raise DatasetError(f"invalid JSON ({e.msg})", summary_path) from e
    missing = [c for c in METRIC_COLUMNS if rows and c not in rows[0]]
    if missing:
        raise DatasetError(f"missing columns {', '.join(missing)}", metrics_path)
    return rows, summary


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


def render_report(rows: Sequence[Dict[str, Any]], summary: Dict[str, Any],
                  console: Optional[Console] = None) -> None:
    console = console or Console()
    table = Table(title=f"Detection metrics ({summary.get('frames', 0)} frames)")
    for column, justify in (("category", "left"), ("band", "left"), ("space", "left"), ("AUC", "right"),
                            ("precision", "right"), ("recall", "right"), ("TP", "right"), ("FP", "right"),
                            ("FN", "right")):
        table.add_column(column, justify=justify)
    for row in rows:
        auc = _fmt(row["auc"]) + (" *" if row["auc_undefined"] else "")
        table.add_row(str(row["category"]), str(row["band"]), str(row["space"]), auc,
                      _fmt(row["precision"]), _fmt(row["recall"]),
                      str(row["tp"]), str(row["fp"]), str(row["fn"]))
    console.print(table)
    heatmap = summary.get("heatmap", {})
    console.print(f"Heatmap totals: precision {_fmt(heatmap.get('total_precision'))}, "
                  f"recall {_fmt(heatmap.get('total_recall'))}")
    overflow = heatmap.get("overflow") or {}
    if any(overflow.values()):
        console.print("Outside the heatmap: " + ", ".join(f"{k} {v}" for k, v in sorted(overflow.items())))
    if any(row["auc_undefined"] for row in rows):
        console.print("* no ground truth and no predictions in scope; AUC reported as 1.0")

from .bev import bev_iou, footprint, iou_matrix_bev, match_bev
from .harness import ALL, band_label, evaluate
from .heatmap import blank_cells, cell_of, heatmap_eval, to_ego
from .matching import FORBIDDEN, Matcher, hungarian, iou_matrix_2d, match_2d, match_by_distance, match_gated
from .metrics import curve_from_steps, match_steps, pr_curve_and_auc

__all__ = [
    "ALL", "FORBIDDEN", "Matcher",
    "band_label", "bev_iou", "blank_cells", "cell_of", "curve_from_steps", "evaluate", "footprint",
    "heatmap_eval", "hungarian", "iou_matrix_2d", "iou_matrix_bev", "match_2d", "match_bev",
    "match_by_distance", "match_gated", "match_steps", "pr_curve_and_auc", "to_ego",
]

"""
Gated one-to-one association.

Pairs whose similarity fails the gate get the FORBIDDEN cost, so the
assignment first maximises the number of admissible pairs and then minimises
their cost. Independent clusters of admissible pairs are solved separately.
"""

from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from models.annotation_model import Box2D
from models.eval_model import MatchResult

# larger than any sum of admissible costs (costs are at most 1 for IoU gates
# and below the association distance for distance gates)
FORBIDDEN = 1e6


def _assign(c: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Optimal assignment of every row of c (n <= m) by shortest augmenting
    paths. Returns the column of each row and the row and column potentials.
    """
    n, m = c.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    # p[j]: row (1-based) assigned to column j; column 0 is the virtual start
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            reduced = c[i0 - 1] - u[i0] - v[1:]
            better = free & (reduced < minv[1:])
            minv[1:] = np.where(better, reduced, minv[1:])
            way[1:] = np.where(better, j0, way[1:])
            candidates = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(candidates)) + 1
            delta = candidates[j1 - 1]
            used_cols = np.nonzero(used)[0]
            u[p[used_cols]] += delta
            v[used_cols] -= delta
            minv[1:] = np.where(free, minv[1:] - delta, minv[1:])
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    cols = np.zeros(n, dtype=np.int64)
    assigned = np.nonzero(p[1:])[0]
    cols[p[assigned + 1] - 1] = assigned
    return cols, u[1:], v[1:]


def _lowest_optimum(c: np.ndarray, cols: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    Among the optimal assignments, the one with the lexicographically lowest
    column sequence. Rows are fixed in order to the lowest column that still
    admits the optimum; only edges tight under the optimal potentials can.
    """
    n, m = c.shape
    tol = 1e-12 * n * max(1.0, float(c.max()))
    tight = c - u[:, None] - v[None, :] <= tol
    cols = cols.copy()
    open_cols = np.ones(m, dtype=bool)
    for r in range(n):
        rest = np.arange(r + 1, n)
        target = float(c[np.arange(r, n), cols[r:]].sum())
        for j in np.nonzero(tight[r, :cols[r]] & open_cols[:cols[r]])[0]:
            avail = np.nonzero(open_cols)[0]
            avail = avail[avail != j]
            sub_cols = _assign(c[np.ix_(rest, avail)])[0] if rest.size else np.zeros(0, dtype=np.int64)
            total = float(c[r, j]) + float(c[rest, avail[sub_cols]].sum())
            if total <= target + tol:
                cols[r] = j
                cols[r + 1:] = avail[sub_cols]
                break
        open_cols[cols[r]] = False
    return cols


def hungarian(cost) -> List[Tuple[int, int]]:
    """
    Minimum-cost assignment of min(n, m) pairs (row, col), sorted by row.

    Among equal-cost optima the lowest row, then column, indices win, so the
    result is deterministic.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"cost matrix must be 2-dimensional, got shape {c.shape}")
    if c.size == 0:
        return []
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix must be finite; use FORBIDDEN for excluded pairs")
    if np.any(c < 0):
        raise ValueError("cost matrix must be non-negative")

    n, m = c.shape
    if n > m:
        # zero-cost dummy columns after the real ones absorb the unassigned rows
        c = np.hstack([c, np.zeros((n, n - m))])
    cols, u, v = _assign(c)
    cols = _lowest_optimum(c, cols, u, v)
    return [(i, int(j)) for i, j in enumerate(cols) if j < m]


def match_gated(cost: np.ndarray, allowed: np.ndarray) -> MatchResult:
    """Hungarian over the admissible pairs only; cost and allowed are (n_gt, n_pred)."""
    cost = np.asarray(cost, dtype=np.float64)
    allowed = np.asarray(allowed, dtype=bool)
    n, m = allowed.shape
    pairs: List[Tuple[int, int]] = []
    if n and m and allowed.any():
        rows, cols = np.nonzero(allowed)
        graph = coo_matrix((np.ones(rows.size), (rows, cols + n)), shape=(n + m, n + m))
        _, labels = connected_components(graph, directed=False)
        for label in np.unique(labels[rows]):
            gt_idx = np.nonzero(labels[:n] == label)[0]
            pred_idx = np.nonzero(labels[n:] == label)[0]
            sub_allowed = allowed[np.ix_(gt_idx, pred_idx)]
            sub_cost = np.where(sub_allowed, cost[np.ix_(gt_idx, pred_idx)], FORBIDDEN)
            for r, c in hungarian(sub_cost):
                if sub_allowed[r, c]:
                    pairs.append((int(gt_idx[r]), int(pred_idx[c])))
    pairs.sort()
    matched_gt = {g for g, _ in pairs}
    matched_pred = {q for _, q in pairs}
    return MatchResult(
        pairs=pairs,
        unmatched_gt=[i for i in range(n) if i not in matched_gt],
        unmatched_pred=[j for j in range(m) if j not in matched_pred],
    )


def match_by_similarity(similarity: np.ndarray, threshold: float) -> MatchResult:
    """Cost 1 - similarity, pairs below threshold gated out."""
    similarity = np.asarray(similarity, dtype=np.float64)
    return match_gated(1.0 - similarity, similarity >= threshold)


def match_by_distance(gt_xy: np.ndarray, pred_xy: np.ndarray, max_distance: float) -> MatchResult:
    """Cost is the top-view center distance; pairs at max_distance or farther are gated out."""
    gt_xy = np.asarray(gt_xy, dtype=np.float64).reshape(-1, 2)
    pred_xy = np.asarray(pred_xy, dtype=np.float64).reshape(-1, 2)
    distance = np.linalg.norm(gt_xy[:, None, :] - pred_xy[None, :, :], axis=2)
    return match_gated(distance, distance < max_distance)


def iou_matrix_2d(gts: Sequence[Box2D], preds: Sequence[Box2D]) -> np.ndarray:
    if not gts or not preds:
        return np.zeros((len(gts), len(preds)))
    a = np.array([b.corners() for b in gts])
    b = np.array([p.corners() for p in preds])
    iw = np.clip(np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0]), 0.0, None)
    ih = np.clip(np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1]), 0.0, None)
    inter = iw * ih
    area_a = np.array([g.area for g in gts])[:, None]
    area_b = np.array([p.area for p in preds])[None, :]
    union = area_a + area_b - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.where(union > 0.0, inter / union, 0.0)
    iou = np.clip(iou, 0.0, 1.0)
    # identical boxes are exactly 1 regardless of rounding
    for i, g in enumerate(gts):
        for j, p in enumerate(preds):
            if g == p and g.area > 0.0:
                iou[i, j] = 1.0
    return iou


def match_2d(gts: Sequence[Box2D], preds: Sequence[Box2D], iou_threshold: float = 0.5) -> MatchResult:
    return match_by_similarity(iou_matrix_2d(gts, preds), iou_threshold)


class Matcher:
    """A similarity function plus its gate, usable on whole frames or subsets of predictions."""

    def __init__(self, similarity: Callable[[Sequence, Sequence], np.ndarray], threshold: float = 0.5):
        if not 0.0 < threshold <= 1.0:
            raise ValueError(f"match threshold must lie in (0, 1], got {threshold}")
        self.similarity = similarity
        self.threshold = threshold

    def __call__(self, gts: Sequence, preds: Sequence) -> MatchResult:
        return match_by_similarity(self.similarity(gts, preds), self.threshold)

import asyncio
import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from models.annotation_model import Box2D
from models.config_model import (
    CategorySpec,
    DatagenConfig,
    EvalConfig,
    ErrorModel,
    HeatmapConfig,
    SceneConfig,
)
from models.geometry_model import Dimensions3
from services.datagen_service import synthesize
from services.eval_service import (
    ALL,
    FORBIDDEN,
    Matcher,
    band_label,
    bev_iou,
    blank_cells,
    cell_of,
    curve_from_steps,
    evaluate,
    heatmap_eval,
    hungarian,
    iou_matrix_2d,
    match_2d,
    match_bev,
    match_by_distance,
    match_gated,
    match_steps,
    pr_curve_and_auc,
    to_ego,
)
from utils.polygon import convex_iou, rectangle

from tests.conftest import make_annotation, make_cuboid, make_frame

BOX_MATCHER = Matcher(iou_matrix_2d, 0.5)


def strip(u1, u2, v=50.0, height=10.0) -> Box2D:
    return Box2D.from_corners(u1, v - height / 2.0, u2, v + height / 2.0)


def brute_force_min(cost: np.ndarray) -> float:
    n, m = cost.shape
    if n > m:
        cost, (n, m) = cost.T, (m, n)
    perms = np.array(list(itertools.permutations(range(m), n)))
    return float(cost[np.arange(n), perms].sum(axis=1).min())


def lowest_optimum(cost: np.ndarray):
    n, m = cost.shape
    if n <= m:
        options = [sorted((i, p[i]) for i in range(n)) for p in itertools.permutations(range(m), n)]
    else:
        options = [sorted((p[j], j) for j in range(m)) for p in itertools.permutations(range(n), m)]
    return min(options, key=lambda pairs: (sum(cost[r, c] for r, c in pairs), pairs))


def inside_footprint(points: np.ndarray, c) -> np.ndarray:
    yaw = 2.0 * math.atan2(c.orientation.y, c.orientation.w)
    d = points - np.array([c.center.x, c.center.z])
    along = d[:, 0] * math.sin(yaw) + d[:, 1] * math.cos(yaw)
    across = d[:, 0] * math.cos(yaw) - d[:, 1] * math.sin(yaw)
    return (np.abs(along) <= c.dims.length / 2.0) & (np.abs(across) <= c.dims.width / 2.0)


class TestHungarian:
    def test_matches_brute_force(self, rng):
        for _ in range(500):
            n, m = int(rng.integers(1, 8)), int(rng.integers(1, 8))
            cost = rng.random((n, m)) if rng.random() < 0.5 else rng.integers(0, 4, (n, m)).astype(float)
            pairs = hungarian(cost)
            assert len(pairs) == min(n, m)
            assert len({r for r, _ in pairs}) == len({c for _, c in pairs}) == len(pairs)
            assert sum(cost[r, c] for r, c in pairs) == pytest.approx(brute_force_min(cost), abs=1e-9)

    def test_matches_scipy_on_large_matrices(self, rng):
        for n, m in [(40, 40), (25, 60), (60, 25)]:
            cost = rng.random((n, m))
            rows, cols = linear_sum_assignment(cost)
            pairs = hungarian(cost)
            assert sum(cost[r, c] for r, c in pairs) == pytest.approx(cost[rows, cols].sum(), abs=1e-9)

    def test_empty(self):
        assert hungarian(np.zeros((0, 3))) == []
        assert hungarian(np.zeros((2, 0))) == []

    def test_pairs_sorted_by_row(self):
        assert hungarian([[5.0, 1.0, 9.0], [1.0, 5.0, 9.0], [9.0, 9.0, 1.0]]) == [(0, 1), (1, 0), (2, 2)]

    def test_ties_prefer_lowest_row_then_column(self):
        assert hungarian([[2.0, 1.0], [2.0, 1.0]]) == [(0, 0), (1, 1)]
        assert hungarian(np.ones((3, 3))) == [(0, 0), (1, 1), (2, 2)]
        assert hungarian(np.ones((3, 2))) == [(0, 0), (1, 1)]

    def test_ties_match_lexicographic_oracle(self, rng):
        for _ in range(500):
            n, m = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            cost = rng.integers(0, 3, (n, m)).astype(float)
            assert hungarian(cost) == lowest_optimum(cost)

    @pytest.mark.parametrize("cost", [[1.0, 2.0], [[np.nan, 1.0]], [[-1.0, 1.0]], [[np.inf]]])
    def test_invalid_cost(self, cost):
        with pytest.raises(ValueError):
            hungarian(cost)

    def test_gated_pairs_are_dropped(self):
        allowed = np.array([[True, False], [False, False]])
        result = match_gated(np.array([[0.2, 0.0], [0.0, 0.0]]), allowed)
        assert result.pairs == [(0, 0)]
        assert result.unmatched_gt == [1]
        assert result.unmatched_pred == [1]

    def test_gate_maximises_pair_count(self):
        # cheapest pair (0, 0) would leave gt 1 without any admissible partner
        cost = np.array([[0.0, 0.4], [0.3, FORBIDDEN]])
        allowed = np.array([[True, True], [True, False]])
        assert match_gated(cost, allowed).pairs == [(0, 1), (1, 0)]


class TestMatch2d:
    def test_identical_boxes_all_match(self):
        boxes = [strip(0, 10), strip(30, 50), strip(100, 120)]
        result = match_2d(boxes, list(boxes))
        assert result.pairs == [(0, 0), (1, 1), (2, 2)]
        assert result.unmatched_gt == [] and result.unmatched_pred == []

    def test_low_overlap_is_unmatched(self):
        result = match_2d([strip(0, 10), strip(20, 30)], [strip(8, 18), strip(100, 110)])
        assert result.pairs == []
        assert result.unmatched_gt == [0, 1]
        assert result.unmatched_pred == [0, 1]

    def test_recovers_pairing_greedy_misses(self):
        gts = [strip(0, 10), strip(4, 14)]
        preds = [strip(2, 12), strip(-3, 7)]
        iou = iou_matrix_2d(gts, preds)
        assert iou[0, 0] == pytest.approx(2.0 / 3.0) and iou[1, 0] == pytest.approx(2.0 / 3.0)
        assert iou[1, 1] < 0.5 <= iou[0, 1]
        assert match_2d(gts, preds).pairs == [(0, 1), (1, 0)]

    def test_empty_inputs(self):
        assert match_2d([], [strip(0, 10)]).unmatched_pred == [0]
        assert match_2d([strip(0, 10)], []).unmatched_gt == [0]

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            Matcher(iou_matrix_2d, 0.0)


class TestBev:
    def test_identical_footprints(self):
        c = make_cuboid(x=3.0, z=50.0, yaw=0.3)
        assert bev_iou(c, c) == 1.0

    def test_rotated_unit_square(self):
        a = make_cuboid(width=1.0, length=1.0)
        b = make_cuboid(width=1.0, length=1.0, yaw=math.pi / 4.0)
        assert bev_iou(a, b) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-9)

    def test_longitudinal_offset(self):
        a = make_cuboid(z=20.0)
        b = make_cuboid(z=20.5)
        assert bev_iou(a, b) == pytest.approx(4.0 / 5.0)

    def test_footprint_overlap_cases(self):
        outer = rectangle(0.0, 10.0, 4.0, 4.0, 0.0)
        inner = rectangle(0.0, 10.0, 2.0, 2.0, 0.7)
        far = rectangle(0.0, 30.0, 4.0, 4.0, 0.0)
        assert convex_iou(outer, inner) == pytest.approx(4.0 / 16.0)
        assert convex_iou(outer, far) == 0.0
        assert convex_iou(outer, rectangle(0.0, 10.0, 0.0, 4.0, 0.0)) == 0.0

    def test_against_monte_carlo(self, rng):
        for _ in range(20):
            a = make_cuboid(x=float(rng.uniform(-1, 1)), z=float(rng.uniform(19, 21)),
                            width=float(rng.uniform(1, 3)), length=float(rng.uniform(2, 6)),
                            yaw=float(rng.uniform(-math.pi, math.pi)))
            b = make_cuboid(x=float(rng.uniform(-1, 1)), z=float(rng.uniform(19, 21)),
                            width=float(rng.uniform(1, 3)), length=float(rng.uniform(2, 6)),
                            yaw=float(rng.uniform(-math.pi, math.pi)))
            points = np.column_stack([rng.uniform(-5, 5, 400_000), rng.uniform(15, 25, 400_000)])
            in_a, in_b = inside_footprint(points, a), inside_footprint(points, b)
            estimate = (in_a & in_b).sum() / max((in_a | in_b).sum(), 1)
            assert bev_iou(a, b) == pytest.approx(estimate, abs=0.015)

    def test_far_longitudinal_error_breaks_match(self):
        near_gt, near_pred = make_cuboid(z=20.0), make_cuboid(z=20.4)
        far_gt, far_pred = make_cuboid(x=10.0, z=180.0), make_cuboid(x=10.0, z=186.0)
        result = match_bev([near_gt, far_gt], [near_pred, far_pred])
        assert result.pairs == [(0, 0)]
        assert result.unmatched_gt == [1]
        assert result.unmatched_pred == [1]


class TestPrCurve:
    def test_perfect_detector(self):
        gts = [[strip(0, 10), strip(30, 50)], [strip(100, 120)]]
        preds = [[(b, 1.0) for b in frame] for frame in gts]
        curve = pr_curve_and_auc(gts, preds, BOX_MATCHER)
        assert curve.auc == 1.0
        point = curve.at(0.5)
        assert (point.precision, point.recall) == (1.0, 1.0)

    def test_no_predictions(self):
        curve = pr_curve_and_auc([[strip(0, 10)]], [[]], BOX_MATCHER)
        assert curve.auc == 0.0
        assert curve.at(0.5).recall == 0.0

    def test_step_curve(self):
        gts = [[strip(0, 10), strip(30, 40), strip(60, 70)]]
        preds = [[(strip(0, 10), 0.9), (strip(30, 40), 0.8), (strip(200, 210), 0.7)]]
        curve = pr_curve_and_auc(gts, preds, BOX_MATCHER)
        assert [p.threshold for p in curve.points] == [0.9, 0.8, 0.7]
        assert [p.recall for p in curve.points] == pytest.approx([1 / 3, 2 / 3, 2 / 3])
        assert [p.precision for p in curve.points] == pytest.approx([1.0, 1.0, 2 / 3])
        assert curve.auc == pytest.approx(2.0 / 3.0)

    def test_nothing_to_evaluate(self):
        curve = pr_curve_and_auc([[], []], [[], []], BOX_MATCHER)
        assert curve.auc == 1.0
        assert curve.auc_undefined

    def test_confidence_out_of_range(self):
        with pytest.raises(ValueError):
            pr_curve_and_auc([[strip(0, 10)]], [[(strip(0, 10), 1.5)]], BOX_MATCHER)

    def test_frame_count_mismatch(self):
        with pytest.raises(ValueError):
            pr_curve_and_auc([[]], [[], []], BOX_MATCHER)

    def test_matches_full_rematching_at_every_threshold(self, rng):
        gts, preds = [], []
        for _ in range(15):
            g = [strip(u, u + float(rng.uniform(10, 30))) for u in rng.uniform(0, 300, int(rng.integers(0, 6)))]
            p = [(strip(u, u + float(rng.uniform(10, 30))), float(np.round(rng.random(), 1)))
                 for u in rng.uniform(0, 300, int(rng.integers(0, 8)))]
            gts.append(g)
            preds.append(p)
        curve = pr_curve_and_auc(gts, preds, BOX_MATCHER)
        for point in curve.points:
            tp = fp = 0
            for g, p in zip(gts, preds):
                active = [b for b, c in p if c >= point.threshold]
                matched = len(match_2d(g, active).pairs)
                tp += matched
                fp += len(active) - matched
            assert (point.tp, point.fp) == (tp, fp)

    def test_masks_split_recall_and_precision(self):
        steps = [match_steps([strip(0, 10), strip(30, 40)],
                             [(strip(0, 10), 0.9), (strip(100, 110), 0.8)], BOX_MATCHER)]
        curve = curve_from_steps(steps, gt_masks=[np.array([True, False])], pred_masks=[np.array([False, True])])
        assert (curve.n_gt, curve.n_pred) == (1, 1)
        last = curve.points[-1]
        assert last.recall == 1.0
        assert last.precision == 0.0


class TestHeatmap:
    def test_grid_shape_and_blank_origin(self):
        config = HeatmapConfig()
        blank = blank_cells(config)
        assert blank.shape == (30, 10)
        assert sorted(zip(*np.nonzero(blank))) == [(10, 5)]
        assert cell_of(config, 0.0, 0.0) == (10, 5)

    @pytest.mark.parametrize("x, z, cell", [
        (2.0, 55.0, (15, 5)), (-20.0, -100.0, (0, 0)), (19.99, 199.9, (29, 9)),
        (20.0, 50.0, None), (0.0, 200.0, None), (0.0, -100.5, None),
    ])
    def test_cell_of(self, x, z, cell):
        assert cell_of(HeatmapConfig(), x, z) == cell

    def test_backward_camera_turns_around(self):
        assert to_ego("back", 3.0, 40.0) == (-3.0, -40.0)
        assert to_ego("front", 3.0, 40.0) == (3.0, 40.0)

    def test_single_pair(self):
        grid = heatmap_eval([np.array([[2.0, 55.0]])], [np.array([[2.5, 56.0]])])
        assert grid.precision[15, 5] == 1.0 and grid.recall[15, 5] == 1.0
        assert np.isnan(grid.precision).sum() == 299
        assert (grid.total_precision, grid.total_recall) == (1.0, 1.0)

    def test_ego_cell_counts_kept_metrics_blank(self):
        grid = heatmap_eval([np.array([[1.0, 7.0], [-1.0, 7.0]])], [np.array([[1.2, 7.5], [-1.2, 7.5]])])
        assert grid.tp_recall[10, 5] == 1 and np.isnan(grid.recall[10, 5])
        assert grid.recall[10, 4] == 1.0
        assert grid.total_recall == 1.0

    def test_distant_prediction_is_fp_and_fn(self):
        grid = heatmap_eval([np.array([[2.0, 55.0]])], [np.array([[2.0, 70.0]])])
        assert grid.fn[15, 5] == 1 and grid.fp[17, 5] == 1
        assert grid.tp_recall.sum() == 0
        assert grid.recall[15, 5] == 0.0 and grid.precision[17, 5] == 0.0

    def test_counts_are_conserved(self, rng):
        gts = [rng.uniform([-30, -120], [30, 220], (int(rng.integers(0, 10)), 2)) for _ in range(30)]
        preds = [g + rng.normal(0, 5, g.shape) for g in gts]
        grid = heatmap_eval(gts, preds)
        o = grid.overflow
        assert grid.tp_recall.sum() + o["tp_gt"] + grid.fn.sum() + o["fn"] == sum(len(g) for g in gts)
        assert grid.tp_precision.sum() + o["tp_pred"] + grid.fp.sum() + o["fp"] == sum(len(p) for p in preds)
        assert grid.tp_recall.sum() + o["tp_gt"] == grid.tp_precision.sum() + o["tp_pred"]

    def test_empty_grid(self):
        grid = heatmap_eval([], [])
        assert grid.total_precision is None and grid.total_recall is None

    def test_far_dropout_lowers_far_recall(self):
        error_model = ErrorModel(box_noise_px=0.0, dropout_knots=[(0.0, 0.0), (150.0, 0.0), (200.0, 0.6)],
                                 longitudinal_noise_coef=0.0, lateral_noise_std=0.0,
                                 orientation_noise_deg=0.0, confidence_noise=0.0)
        run = asyncio.run(synthesize(DatagenConfig(error_model=error_model), 40, seed=11))
        grid = asyncio.run(evaluate(run.ground_truth, run.predictions)).heatmap

        def recall(rows):
            tp, fn = grid.tp_recall[rows].sum(), grid.fn[rows].sum()
            return tp / (tp + fn)

        assert recall(slice(10, 22)) == 1.0
        assert recall(slice(25, 30)) < 1.0


class TestEvaluate:
    def frames(self, k):
        return [
            make_frame(k, [make_annotation(k, x=-3.0, y=1.0, z=30.0),
                           make_annotation(k, "large_vehicle", x=6.0, y=0.0, z=135.0,
                                           width=2.5, height=3.2, length=10.0)], frame_id="a"),
            make_frame(k, [make_annotation(k, "pedestrian", x=1.0, y=1.0, z=12.0,
                                           width=0.6, height=1.7, length=0.6)], frame_id="b"),
            make_frame(k, [make_annotation(k, x=-10.0, y=0.8, z=80.0)], frame_id="c", camera="back"),
        ]

    def test_perfect_predictions(self, k):
        frames = self.frames(k)
        report = asyncio.run(evaluate(frames, {f.id: f.annotations for f in frames}))
        for row in report.rows:
            assert row["auc"] == 1.0
            if row["n_gt"]:
                assert (row["precision"], row["recall"]) == (1.0, 1.0)
            else:
                assert row["auc_undefined"]
        assert (report.heatmap.total_precision, report.heatmap.total_recall) == (1.0, 1.0)
        assert report.row(ALL, ALL, "2d")["n_gt"] == 4

    def test_row_layout(self, k):
        frames = self.frames(k)
        report = asyncio.run(evaluate(frames, {}))
        bands = [ALL, "0-120", "120-150", "150-200"]
        scopes = [ALL, "car", "large_vehicle", "pedestrian"]
        assert [(r["space"], r["category"], r["band"]) for r in report.rows] == [
            (space, scope, band) for space in ("2d", "bev") for scope in scopes for band in bands]
        assert report.row("large_vehicle", "120-150", "bev")["n_gt"] == 1
        assert report.row(ALL, ALL, "2d")["recall"] == 0.0

    def test_class_agnostic(self, k):
        report = asyncio.run(evaluate(self.frames(k), {}, EvalConfig(class_agnostic=True)))
        assert {r["category"] for r in report.rows} == {ALL}
        assert len(report.rows) == 8

    def test_unknown_frames_reported(self, k):
        frames = self.frames(k)
        report = asyncio.run(evaluate(frames, {"zzz": frames[0].annotations}))
        assert report.unknown_frames == ["zzz"]
        assert report.n_pred == 0

    def test_missing_row(self, k):
        report = asyncio.run(evaluate(self.frames(k), {}))
        with pytest.raises(KeyError):
            report.row("bicycle", ALL, "2d")

    def test_workers_do_not_change_results(self, k):
        frames = self.frames(k)
        preds = {"a": frames[0].annotations[:1], "c": frames[2].annotations}
        serial = asyncio.run(evaluate(frames, preds))
        parallel = asyncio.run(evaluate(frames, preds, workers=4))
        assert serial.rows == parallel.rows

    def test_band_label(self):
        assert band_label((0.0, 120.0)) == "0-120"
        assert band_label((12.5, 20.0)) == "12.5-20"

    def test_bev_recall_drops_with_distance_while_2d_holds(self):
        scene = SceneConfig(categories=[
            CategorySpec(name="car", weight=0.7, prior=Dimensions3(width=1.8, height=1.5, length=4.5)),
            CategorySpec(name="large_vehicle", weight=0.3, prior=Dimensions3(width=2.5, height=3.2, length=10.0)),
        ])
        error_model = ErrorModel(box_noise_px=0.0, dropout_knots=[(0.0, 0.0)], longitudinal_noise_coef=0.02,
                                 lateral_noise_std=0.0, orientation_noise_deg=0.0, confidence_noise=0.05)
        run = asyncio.run(synthesize(DatagenConfig(scene=scene, error_model=error_model), 40, seed=5))
        report = asyncio.run(evaluate(run.ground_truth, run.predictions))
        assert report.row(ALL, "0-120", "2d")["recall"] == 1.0
        assert report.row(ALL, "150-200", "2d")["recall"] == 1.0
        assert report.row(ALL, "150-200", "bev")["recall"] < report.row(ALL, "0-120", "bev")["recall"]


class TestDistanceMatching:
    def test_strict_gate(self):
        assert match_by_distance([[0.0, 0.0]], [[0.0, 10.0]], 10.0).pairs == []
        assert match_by_distance([[0.0, 0.0]], [[0.0, 9.99]], 10.0).pairs == [(0, 0)]

    def test_closest_assignment(self):
        result = match_by_distance([[0.0, 0.0], [0.0, 6.0]], [[0.0, 5.0], [0.0, 1.0]], 10.0)
        assert result.pairs == [(0, 1), (1, 0)]

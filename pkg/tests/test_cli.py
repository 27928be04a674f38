import csv
import json
import os

import pytest

from common import DETECTIONS_FILE, FRAMES_FILE, MANIFEST_FILE, PREDICTIONS_FILE
from main import run_command
from services.dataset_service import read_dataset
from services.report_service import HEATMAP_FILE, METRICS_FILE, PRECISION_IMAGE, RECALL_IMAGE, SUMMARY_FILE

NOISELESS = """
[datagen.error_model]
box_noise_px = 0.0
dropout_knots = [[0.0, 0.0]]
longitudinal_noise_coef = 0.0
lateral_noise_std = 0.0
orientation_noise_deg = 0.0
confidence_noise = 0.0
"""


def tree_bytes(root):
    out = {}
    for directory, _, files in os.walk(root):
        for name in files:
            path = os.path.join(directory, name)
            with open(path, "rb") as f:
                out[os.path.relpath(path, root)] = f.read()
    return out


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def noiseless_config(tmp_path):
    path = tmp_path / "noiseless.toml"
    path.write_text(NOISELESS)
    return str(path)


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    assert run_command(["synth", "--out", str(out), "--frames", "4", "--seed", "1"]) == 0
    return out


class TestSynth:
    def test_layout(self, synth_dir):
        for name in (DETECTIONS_FILE, PREDICTIONS_FILE, f"ground_truth/{MANIFEST_FILE}", f"annotated/{FRAMES_FILE}"):
            assert (synth_dir / name).is_file()
        manifest = json.loads((synth_dir / "annotated" / MANIFEST_FILE).read_text())
        assert [p["operation"] for p in manifest["provenance"]] == ["synth", "annotation_cutoff"]
        assert manifest["provenance"][0]["seed"] == 1

    def test_reproducible(self, synth_dir, tmp_path):
        again = tmp_path / "again"
        assert run_command(["synth", "--out", str(again), "--frames", "4", "--seed", "1"]) == 0
        assert tree_bytes(again) == tree_bytes(synth_dir)

    def test_workers_do_not_change_output(self, synth_dir, tmp_path):
        parallel = tmp_path / "parallel"
        assert run_command(["--workers", "4", "synth", "--out", str(parallel), "--frames", "4", "--seed", "1"]) == 0
        assert tree_bytes(parallel) == tree_bytes(synth_dir)

    def test_render(self, tmp_path):
        out = tmp_path / "rendered"
        assert run_command(["synth", "--out", str(out), "--frames", "1", "--render"]) == 0
        frames, _ = read_dataset(str(out / "ground_truth"))
        assert frames[0].raster is not None


class TestPipeline:
    def test_noiseless_end_to_end(self, tmp_path, noiseless_config):
        synth, fused, evaluated = tmp_path / "synth", tmp_path / "fused", tmp_path / "eval"
        assert run_command(["--config", noiseless_config, "synth", "--out", str(synth), "--frames", "6",
                            "--seed", "2"]) == 0
        assert run_command(["--config", noiseless_config, "fuse", "--dataset", str(synth / "annotated"),
                            "--detections", str(synth / DETECTIONS_FILE), "--out", str(fused)]) == 0
        assert run_command(["--config", noiseless_config, "eval", "--dataset", str(synth / "ground_truth"),
                            "--predictions", str(synth / PREDICTIONS_FILE), "--out", str(evaluated)]) == 0

        truth, _ = read_dataset(str(synth / "ground_truth"))
        fused_frames, fused_manifest = read_dataset(str(fused))
        assert fused_manifest.provenance[-1].operation == "fuse"
        for t, f in zip(truth, fused_frames):
            assert len(f.annotations) == len(t.annotations)
            assert sum(a.is_pseudo for a in f.annotations) == sum(a.cuboid.center.z > 120.0 for a in t.annotations)

        for row in read_csv(evaluated / METRICS_FILE):
            if int(row["n_gt"]):
                assert (float(row["auc"]), float(row["precision"]), float(row["recall"])) == (1.0, 1.0, 1.0)
        for cell in read_csv(evaluated / HEATMAP_FILE):
            for key in ("precision", "recall"):
                assert cell[key] in ("", "1")
        for name in (PRECISION_IMAGE, RECALL_IMAGE, SUMMARY_FILE):
            assert (evaluated / name).is_file()

        assert run_command(["report", "--eval-dir", str(evaluated)]) == 0

    def test_augment(self, synth_dir, tmp_path):
        out = tmp_path / "augmented"
        assert run_command(["augment", "--dataset", str(synth_dir / "annotated"), "--out", str(out),
                            "--seed", "3"]) == 0
        frames, manifest = read_dataset(str(out))
        entry = manifest.provenance[-1]
        assert entry.operation == "augment" and entry.seed == 3
        assert sorted(entry.parameters["params"]) == [f.id for f in frames]
        assert entry.parameters["scale_mode"] == "mixed"
        errors = entry.parameters["vanilla_reprojection_error_px"]
        assert sorted(errors) == [f.id for f in frames]
        assert all(e >= 0.0 for e in errors.values()) and max(errors.values()) > 0.0

    def test_class_agnostic_eval(self, synth_dir, tmp_path):
        out = tmp_path / "eval"
        assert run_command(["eval", "--dataset", str(synth_dir / "ground_truth"), "--predictions",
                            str(synth_dir / PREDICTIONS_FILE), "--out", str(out), "--class-agnostic"]) == 0
        assert {row["category"] for row in read_csv(out / METRICS_FILE)} == {"all"}


class TestExitCodes:
    def test_losscheck(self, capsys):
        assert run_command(["losscheck", "--points", "5"]) == 0
        assert "Loss checks" in capsys.readouterr().out

    def test_report_prints_table(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "eval"
        run_command(["eval", "--dataset", str(synth_dir / "ground_truth"), "--predictions",
                     str(synth_dir / PREDICTIONS_FILE), "--out", str(out)])
        capsys.readouterr()
        assert run_command(["report", "--eval-dir", str(out)]) == 0
        assert "Detection metrics (4 frames)" in capsys.readouterr().out

    def test_missing_detections_file(self, synth_dir, tmp_path):
        assert run_command(["fuse", "--dataset", str(synth_dir / "annotated"),
                            "--detections", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "x")]) == 2

    def test_unknown_command(self):
        assert run_command(["train"]) == 2

    def test_missing_option(self):
        assert run_command(["synth"]) == 2

    def test_invalid_config_value(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[eval]\niou_threshold = 1.5\n")
        assert run_command(["--config", str(path), "synth", "--out", str(tmp_path / "o"), "--frames", "1"]) == 1

    def test_malformed_dataset(self, synth_dir, tmp_path):
        (synth_dir / "annotated" / FRAMES_FILE).write_text("{broken\n")
        assert run_command(["fuse", "--dataset", str(synth_dir / "annotated"),
                            "--detections", str(synth_dir / DETECTIONS_FILE), "--out", str(tmp_path / "x")]) == 1

    def test_report_without_outputs(self, tmp_path):
        assert run_command(["report", "--eval-dir", str(tmp_path)]) == 1

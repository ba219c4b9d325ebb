import csv

import numpy as np
import pytest

from screenmesh import synthetic
from screenmesh.camera import CameraModel
from screenmesh.evaluation import (
    SCALING_FIELDS,
    EvalReport,
    aligned_rmse,
    compression_rate,
    pipeline,
    scaling_study,
)
from screenmesh.image_io import load_depth_map
from screenmesh.mesh_io import read_obj, write_obj, write_ply
from screenmesh.remesher import SizingConfig


def test_rmse_exact_and_offset():
    rng = np.random.default_rng(0)
    gt = rng.normal(size=(20, 30))
    mask = np.ones(gt.shape, bool)
    assert aligned_rmse(gt, gt, mask).rmse == 0.0
    res = aligned_rmse(gt + 7.3, gt, mask)
    assert res.rmse == pytest.approx(0.0, abs=1e-12)
    assert res.alignment == pytest.approx(-7.3)


def test_rmse_uniform_noise():
    rng = np.random.default_rng(1)
    gt = np.zeros((300, 300))
    delta = 0.2
    pred = gt + rng.uniform(-delta, delta, gt.shape)
    res = aligned_rmse(pred, gt, np.ones(gt.shape, bool))
    assert res.rmse == pytest.approx(delta / np.sqrt(3), rel=0.05)


def test_rmse_perspective_scale():
    gt = np.linspace(1, 2, 50).reshape(5, 10)
    res = aligned_rmse(3.0 * gt, gt, np.ones(gt.shape, bool), perspective=True)
    assert res.rmse == pytest.approx(0.0, abs=1e-12)
    assert res.alignment == pytest.approx(1 / 3)


def test_rmse_counts_uncovered():
    gt = np.zeros((4, 4))
    pred = gt.copy()
    pred[0, 0] = np.nan
    res = aligned_rmse(pred, gt, np.ones(gt.shape, bool))
    assert (res.n_pixels, res.n_uncovered) == (15, 1)
    with pytest.raises(ValueError):
        aligned_rmse(np.full((2, 2), np.nan), np.zeros((2, 2)), np.ones((2, 2), bool))


def test_compression_rate():
    assert compression_rate(10, 1000) == pytest.approx(0.99)
    with pytest.raises(ValueError):
        compression_rate(1, 0)


def test_plane_pipeline_compression_and_outputs(tmp_path):
    nm, gt = synthetic.render(synthetic.plane(200, 0.3, -0.2))
    res = pipeline(nm, gt=gt, out_obj=tmp_path / "p.obj", out_pfm=tmp_path / "p.pfm", report_csv=tmp_path / "p.csv")
    assert res.report.compression_rate >= 0.99
    assert res.report.rmse < 1e-5
    verts, faces = read_obj(tmp_path / "p.obj")
    assert verts.shape == (res.report.vertex_count, 3) and faces.shape == (res.report.face_count, 3)
    depth = load_depth_map(tmp_path / "p.pfm")
    assert depth.mask.sum() == nm.n_foreground
    rows = list(csv.DictReader(open(tmp_path / "p.csv")))
    assert len(rows) == 1 and "wall_times" not in rows[0]
    assert int(rows[0]["foreground_pixel_count"]) == nm.n_foreground


def test_pipeline_is_deterministic(sphere64):
    nm, gt = sphere64
    a = pipeline(nm, gt=gt).report
    b = pipeline(nm, gt=gt).report
    assert a.to_csv() == b.to_csv()
    assert "time" not in a.to_csv()
    assert "time_refine" in a.to_csv(include_timings=True)


def test_dense_pipeline(sphere64):
    nm, gt = sphere64
    rep = pipeline(nm, gt=gt, dense_baseline=True).report
    assert rep.vertex_count > nm.n_foreground
    assert rep.uncovered_pixels == 0
    assert rep.rmse < 0.5


def test_report_summary():
    rep = EvalReport(10, 12, 100, 0.9, 0.5, 0, 30.0, 60.0, 1.0, 0.5, {"refine": 1.0})
    assert "compression" in rep.summary() and "refine" in rep.summary()
    assert list(rep.metrics())[0] == "vertex_count"


def test_scaling_study_pixel_counts(tmp_path):
    path = tmp_path / "scaling.csv"
    rows = scaling_study("sphere", (64, 128), epsilon=0.5, base_resolution=64, dense=True, csv_path=path, radius=24.0)
    for row in rows:
        nm, _ = synthetic.render(synthetic.scaled_scene("sphere", row["resolution"], 64, radius=24.0))
        assert row["pixels"] == int(nm.mask.sum())
        assert row["epsilon_px"] == pytest.approx(0.5 * row["resolution"] / 64)
    with open(path) as fh:
        got = list(csv.DictReader(fh))
    assert tuple(got[0]) == SCALING_FIELDS
    assert [int(r["pixels"]) for r in got] == [r["pixels"] for r in rows]
    with pytest.raises(ValueError):
        scaling_study("sphere", (64,))


def test_mesh_writers(tmp_path):
    verts = np.array([[0, 0, 0], [1, 0, 0.5], [0, 1, 0.25]])
    faces = np.array([[0, 1, 2]])
    write_obj(tmp_path / "t.obj", verts, faces, comment="triangle")
    v, f = read_obj(tmp_path / "t.obj")
    np.testing.assert_array_equal(v, verts)
    np.testing.assert_array_equal(f, faces)
    write_ply(tmp_path / "t.ply", verts, faces)
    text = (tmp_path / "t.ply").read_text()
    assert "element vertex 3" in text and text.rstrip().endswith("3 0 1 2")
    with pytest.raises(ValueError):
        write_obj(tmp_path / "bad.obj", verts, np.array([[0, 1, 3]]))


def test_perspective_pipeline_runs():
    nm, _ = synthetic.render(synthetic.sphere(64, 24.0))
    cam = CameraModel.perspective(300.0, 300.0, 32.0, 32.0, 500.0)
    res = pipeline(nm, cam, SizingConfig(epsilon=0.5))
    d = res.surface.depth
    assert np.all(d > 0) and d.mean() == pytest.approx(500.0, rel=0.05)

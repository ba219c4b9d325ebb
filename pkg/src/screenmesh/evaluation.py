"""Metrics, the end-to-end pipeline and the resolution scaling study."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .camera import CameraModel
from .diffgeo import curvature_field
from .image_io import DepthMap, NormalMap, gaussian_blur_normals, load_normal_map, save_depth_map
from .integrator import IntegratedSurface, assemble, integrate_dense_baseline, lift, solve
from .mesh_io import write_mesh
from .raster import rasterize
from .remesher import ScreenMesh, SizingConfig, refine
from .synthetic import render, scaled_scene

logger = logging.getLogger(__name__)

#: Angle band used by the mesh-quality statistics (degrees).
ANGLE_BAND = (20.0, 120.0)


@dataclass
class RMSEResult:
    rmse: float
    n_pixels: int
    n_uncovered: int
    alignment: float


@dataclass
class EvalReport:
    """Summary of one pipeline run. ``rmse`` is NaN when no ground truth was given."""

    vertex_count: int
    face_count: int
    foreground_pixel_count: int
    compression_rate: float
    rmse: float
    uncovered_pixels: int
    min_angle: float
    median_angle: float
    angle_band_fraction: float
    epsilon_px: float
    wall_times: dict = field(default_factory=dict)

    def metrics(self) -> dict:
        """All fields except the timings, in a fixed order."""
        d = asdict(self)
        d.pop("wall_times")
        return d

    def to_csv(self, include_timings: bool = False) -> str:
        row = self.metrics()
        if include_timings:
            row.update({f"time_{k}": v for k, v in self.wall_times.items()})
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        w.writeheader()
        w.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"vertices         {self.vertex_count}",
            f"faces            {self.face_count}",
            f"foreground px    {self.foreground_pixel_count}",
            f"compression      {self.compression_rate:.4f}",
            f"rmse             {self.rmse:.6g}",
            f"uncovered px     {self.uncovered_pixels}",
            f"angles           min {self.min_angle:.2f}  median {self.median_angle:.2f}  "
            f"in [{ANGLE_BAND[0]:g}, {ANGLE_BAND[1]:g}]: {100 * self.angle_band_fraction:.2f}%",
        ]
        lines += [f"time {k:<12s}{v:.3f} s" for k, v in self.wall_times.items()]
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, float):
        return "%.9g" % v
    return v


def compression_rate(n_vertices: int, n_pixels: int) -> float:
    """``1 - V / |Omega|``."""
    if n_pixels <= 0:
        raise ValueError("empty foreground")
    return 1.0 - n_vertices / n_pixels


def rasterize_depth(surface: IntegratedSurface, mask) -> np.ndarray:
    """Barycentric interpolation of vertex depth at pixel centres; NaN where uncovered."""
    mask = np.asarray(mask, dtype=bool)
    face_of, bary = rasterize(surface.screen, surface.faces, mask, with_barycentrics=True)
    out = np.full(mask.shape, np.nan)
    ok = face_of >= 0
    out[ok] = np.sum(surface.depth[surface.faces[face_of[ok]]] * bary[ok], axis=1)
    return out


def aligned_rmse(pred, gt, mask, perspective: bool = False) -> RMSEResult:
    """RMSE between two depth images after offset (or, for perspective, scale) alignment.

    Pixels of ``mask`` where ``pred`` is NaN count as uncovered and are excluded.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    ok = mask & np.isfinite(pred) & np.isfinite(gt)
    n_unc = int((mask & ~np.isfinite(pred)).sum())
    if not ok.any():
        raise ValueError("prediction and ground truth do not overlap")
    p, g = pred[ok], gt[ok]
    if perspective:
        pp = float(p @ p)
        if pp == 0.0:
            raise ValueError("prediction is identically zero")
        align = float(p @ g) / pp
        r = align * p - g
    else:
        align = float(np.mean(g - p))
        r = p + align - g
    return RMSEResult(float(np.sqrt(np.mean(r * r))), int(ok.sum()), n_unc, align)


def rmse_aligned(pred: IntegratedSurface, gt: DepthMap, cam: CameraModel | None = None, region=None) -> RMSEResult:
    """Rasterise ``pred`` over ``gt``'s foreground (optionally restricted to ``region``) and compare."""
    cam = cam or CameraModel()
    mask = gt.mask if region is None else gt.mask & np.asarray(region, dtype=bool)
    return aligned_rmse(rasterize_depth(pred, mask), gt.depth, mask, cam.is_perspective)


def mesh_quality(mesh: ScreenMesh, metric: bool = True) -> tuple[float, float, float]:
    """``(min, median, fraction in ANGLE_BAND)`` of the triangle angles.

    With ``metric=True`` the angles are measured in each face's first
    fundamental form, i.e. on the surface rather than in the image.
    """
    a = mesh.angles(metric=metric)
    if a.size == 0:
        return float("nan"), float("nan"), float("nan")
    inside = (a >= ANGLE_BAND[0]) & (a <= ANGLE_BAND[1])
    return float(a.min()), float(np.median(a)), float(inside.mean())


class _Timer:
    def __init__(self):
        self.times = {}

    def __call__(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.times[name] = timer.times.get(name, 0.0) + time.perf_counter() - self.t0

        return _Ctx()


@dataclass
class PipelineResult:
    report: EvalReport
    mesh: ScreenMesh
    surface: IntegratedSurface
    z: np.ndarray


def pipeline(
    normals,
    cam: CameraModel | None = None,
    cfg: SizingConfig | None = None,
    *,
    tol: float = 1e-8,
    cot_mode: str = "metric",
    gt: DepthMap | None = None,
    dense_baseline: bool = False,
    out_obj=None,
    out_pfm=None,
    report_csv=None,
    validate: bool = False,
) -> PipelineResult:
    """blur, curvature, refine, assemble, solve, lift, export.

    ``normals`` is a :class:`NormalMap` or a path to one. With
    ``dense_baseline=True`` the pixel grid is integrated instead of the
    refined mesh.
    """
    cam = cam or CameraModel()
    cfg = cfg or SizingConfig()
    clock = _Timer()
    with clock("load"):
        nm = normals if isinstance(normals, NormalMap) else load_normal_map(normals)
    if dense_baseline:
        with clock("integrate"):
            mesh, z = integrate_dense_baseline(nm, cam, tol, cot_mode)
    else:
        with clock("blur"):
            blurred = gaussian_blur_normals(nm, cfg.blur_sigma) if cfg.blur_sigma else nm
        with clock("curvature"):
            cf = curvature_field(blurred, cam)
        with clock("refine"):
            mesh = refine(nm, cam, cfg, curvature=cf, validate=validate)
        with clock("assemble"):
            system = assemble(mesh, cam, cot_mode)
        with clock("solve"):
            z = solve(system, tol)
    with clock("lift"):
        surface = lift(mesh, z, cam)

    rmse, uncovered = float("nan"), 0
    if gt is not None:
        with clock("evaluate"):
            res = rmse_aligned(surface, gt, cam)
        rmse, uncovered = res.rmse, res.n_uncovered
    with clock("export"):
        if out_obj is not None:
            write_mesh(out_obj, surface.positions, surface.faces)
        if out_pfm is not None:
            depth = rasterize_depth(surface, nm.mask)
            save_depth_map(DepthMap(np.nan_to_num(depth), nm.mask & np.isfinite(depth)), out_pfm)

    amin, amed, band = mesh_quality(mesh)
    report = EvalReport(
        vertex_count=mesh.n_vertices,
        face_count=mesh.n_faces,
        foreground_pixel_count=nm.n_foreground,
        compression_rate=compression_rate(mesh.n_vertices, nm.n_foreground),
        rmse=rmse,
        uncovered_pixels=uncovered,
        min_angle=amin,
        median_angle=amed,
        angle_band_fraction=band,
        epsilon_px=cfg.epsilon,
        wall_times=clock.times,
    )
    if report_csv is not None:
        Path(report_csv).write_text(report.to_csv(), encoding="ascii")
    return PipelineResult(report, mesh, surface, z)


SCALING_FIELDS = ("resolution", "pixels", "vertices", "compression", "epsilon_px", "rmse", "mesh_time", "integrate_time", "dense_time", "dense_rmse")


def scaling_study(
    kind: str = "sphere",
    resolutions=(256, 512, 1024),
    epsilon: float = 0.5,
    base_resolution: int = 256,
    dense: bool = True,
    csv_path=None,
    tol: float = 1e-8,
    **params,
) -> list[dict]:
    """Vertex count and timings of the same physical scene at several resolutions.

    ``epsilon`` is in physical units (pixels of the ``base_resolution``
    image), so the pixel tolerance grows with the resolution.
    """
    resolutions = list(resolutions)
    if len(resolutions) < 2:
        raise ValueError("need at least two resolutions")
    rows = []
    for res in resolutions:
        scene = scaled_scene(kind, res, base_resolution, **params)
        cam = scene.camera
        nm, gt = render(scene)
        cfg = SizingConfig.from_physical(epsilon, cam)
        t0 = time.perf_counter()
        mesh = refine(nm, cam, cfg)
        t1 = time.perf_counter()
        z = solve(assemble(mesh, cam), tol)
        t2 = time.perf_counter()
        row = {
            "resolution": res,
            "pixels": int(nm.mask.sum()),
            "vertices": mesh.n_vertices,
            "compression": compression_rate(mesh.n_vertices, nm.n_foreground),
            "epsilon_px": cfg.epsilon,
            "rmse": rmse_aligned(lift(mesh, z, cam), gt, cam).rmse,
            "mesh_time": t1 - t0,
            "integrate_time": t2 - t1,
            "dense_time": float("nan"),
            "dense_rmse": float("nan"),
        }
        if dense:
            t3 = time.perf_counter()
            gmesh, gz = integrate_dense_baseline(nm, cam, tol)
            row["dense_time"] = time.perf_counter() - t3
            row["dense_rmse"] = rmse_aligned(lift(gmesh, gz, cam), gt, cam).rmse
        logger.info("scaling %s %d: %s", kind, res, row)
        rows.append(row)
    if csv_path is not None:
        write_rows(csv_path, rows, SCALING_FIELDS)
    return rows


def write_rows(path, rows, fields) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in fields})

"""Command line interface: ``screenmesh <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import re
import sys

import numpy as np

from .camera import CameraModel, parse_intrinsics, read_intrinsics_file
from .diffgeo import curvature_field
from .evaluation import (
    SCALING_FIELDS,
    aligned_rmse,
    mesh_quality,
    pipeline,
    rasterize_depth,
    scaling_study,
    write_rows,
)
from .image_io import DepthMap, NormalMap, gaussian_blur_normals, load_depth_map, load_normal_map, save_depth_map, save_normal_map, write_pfm
from .integrator import COT_MODES, IntegratedSurface, integrate, integrate_dense_baseline, lift
from .mesh_io import read_obj, write_mesh
from .remesher import SizingConfig, refine
from .synthetic import KINDS, SyntheticScene, render

logger = logging.getLogger("screenmesh")

_EPS_RE = re.compile(r"^\s*([0-9.eE+-]+)\s*(px|mm)?\s*$")


def parse_epsilon(text: str):
    """``"0.5px"`` -> (0.5, "px"); ``"0.5"`` or ``"0.5mm"`` -> (0.5, "physical")."""
    m = _EPS_RE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"cannot parse epsilon {text!r}")
    value = float(m.group(1))
    if not value > 0:
        raise argparse.ArgumentTypeError("epsilon must be positive")
    return value, "px" if m.group(2) == "px" else "physical"


def _camera(args) -> CameraModel:
    if args.camera == "ortho":
        return CameraModel.orthographic(args.pixel_pitch or 1.0)
    if args.intrinsics is None:
        raise SystemExit("--camera persp needs --intrinsics")
    if args.mean_depth is None:
        raise SystemExit("--camera persp needs --mean-depth")
    if len(args.intrinsics) == 1:
        C = read_intrinsics_file(args.intrinsics[0])
    else:
        C = parse_intrinsics([float(x) for x in args.intrinsics])
    return CameraModel("perspective", C, args.mean_depth, args.pixel_pitch)


def _config(args, cam: CameraModel) -> SizingConfig:
    value, unit = args.epsilon
    eps = value if unit == "px" else float(cam.physical_to_pixel(value))
    return SizingConfig(
        epsilon=eps,
        l_min=args.lmin,
        l_max=args.lmax,
        outer_iterations=args.iterations,
        smoothing_iterations=args.smoothing_iterations,
    )


def _add_camera(p):
    g = p.add_argument_group("camera")
    g.add_argument("--camera", choices=("ortho", "persp"), default="ortho")
    g.add_argument("--pixel-pitch", type=float, default=None, help="physical size of one pixel")
    g.add_argument("--intrinsics", nargs="+", metavar="V", help="fx fy cx cy, nine matrix entries, or a file")
    g.add_argument("--mean-depth", type=float, default=None, help="weak-perspective mean distance")


def _add_sizing(p):
    g = p.add_argument_group("remeshing")
    g.add_argument("--epsilon", type=parse_epsilon, default=(0.5, "px"), help="tolerance, physical units or with a 'px' suffix")
    g.add_argument("--iterations", type=int, default=10)
    g.add_argument("--smoothing-iterations", type=int, default=5)
    g.add_argument("--lmin", type=float, default=1.0)
    g.add_argument("--lmax", type=float, default=100.0)


def _add_solver(p):
    g = p.add_argument_group("integration")
    g.add_argument("--tol", type=float, default=1e-8)
    g.add_argument("--cot", choices=COT_MODES, default="metric", help="angle measure for the cotangent weights")
    g.add_argument("--dense-baseline", action="store_true", help="integrate the unrefined pixel grid")


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    params = {k: getattr(args, k) for k in ("radius", "a", "b", "s1", "s2", "amplitude", "period", "width") if getattr(args, k) is not None}
    cam = CameraModel.orthographic(args.pixel_pitch or 1.0)
    scene = SyntheticScene(args.kind, (args.resolution, args.resolution), params, cam)
    nm, depth = render(scene)
    if args.noise > 0:
        rng = np.random.default_rng(args.seed)
        noisy = nm.normals + rng.normal(0.0, args.noise, nm.normals.shape)
        nm = NormalMap.from_arrays(noisy, nm.mask)
    save_normal_map(nm, args.out_normals)
    if args.out_pfm:
        save_depth_map(depth, args.out_pfm)
    print(f"{args.kind}: {nm.n_foreground} foreground pixels -> {args.out_normals}")
    return 0


def cmd_curvature(args):
    cam = _camera(args)
    nm = load_normal_map(args.normals)
    src = gaussian_blur_normals(nm) if not args.no_blur else nm
    cf = curvature_field(src, cam)
    k = cf.kappa_max[cf.mask]
    print(f"kappa_max over {k.size} px: min {k.min():.6g} median {np.median(k):.6g} max {k.max():.6g} (1/px)")
    if args.out_pfm:
        write_pfm(args.out_pfm, np.where(cf.mask, cf.kappa_max, np.nan))
    return 0


def cmd_mesh(args):
    cam = _camera(args)
    nm = load_normal_map(args.normals)
    cfg = _config(args, cam)
    mesh = refine(nm, cam, cfg)
    amin, amed, band = mesh_quality(mesh)
    print(f"vertices {mesh.n_vertices}  faces {mesh.n_faces}  foreground {nm.n_foreground}")
    print(f"angles: min {amin:.2f} median {amed:.2f} in band {100 * band:.2f}%")
    if args.out_obj:
        write_mesh(args.out_obj, np.column_stack([mesh.verts, np.zeros(mesh.n_vertices)]), mesh.faces)
    return 0


def cmd_integrate(args):
    cam = _camera(args)
    nm = load_normal_map(args.normals)
    if args.dense_baseline:
        mesh, z = integrate_dense_baseline(nm, cam, args.tol, args.cot)
        surface = lift(mesh, z, cam)
    else:
        mesh = refine(nm, cam, _config(args, cam))
        surface, z = integrate(mesh, cam, args.tol, args.cot)
    print(f"integrated {mesh.n_vertices} vertices, {mesh.n_faces} faces")
    if args.out_obj:
        write_mesh(args.out_obj, surface.positions, surface.faces)
    if args.out_pfm:
        d = rasterize_depth(surface, nm.mask)
        save_depth_map(DepthMap(np.nan_to_num(d), np.isfinite(d)), args.out_pfm)
    return 0


def cmd_pipeline(args):
    cam = _camera(args)
    gt = load_depth_map(args.gt) if args.gt else None
    result = pipeline(
        args.normals,
        cam,
        _config(args, cam),
        tol=args.tol,
        cot_mode=args.cot,
        gt=gt,
        dense_baseline=args.dense_baseline,
        out_obj=args.out_obj,
        out_pfm=args.out_pfm,
        report_csv=args.report_csv,
    )
    print(result.report.summary())
    return 0


def cmd_eval(args):
    cam = _camera(args)
    gt = load_depth_map(args.gt)
    if args.pred.lower().endswith(".pfm"):
        pred = load_depth_map(args.pred)
        depth = np.where(pred.mask, pred.depth, np.nan)
    else:
        verts, faces = read_obj(args.pred)
        if cam.is_perspective:
            p = verts @ cam.intrinsics.T
            screen = p[:, :2] / p[:, 2:3]
        else:
            screen = verts[:, :2] / cam.pixel_pitch
        depth = rasterize_depth(IntegratedSurface(verts, faces, screen, verts[:, 2]), gt.mask)
    res = aligned_rmse(depth, gt.depth, gt.mask, cam.is_perspective)
    print(f"rmse {res.rmse:.6g}  pixels {res.n_pixels}  uncovered {res.n_uncovered}  alignment {res.alignment:.6g}")
    if args.report_csv:
        write_rows(args.report_csv, [res.__dict__], ("rmse", "n_pixels", "n_uncovered", "alignment"))
    return 0


def cmd_bench(args):
    value, unit = args.epsilon
    rows = scaling_study(
        args.kind,
        args.resolutions,
        epsilon=value,
        base_resolution=args.base_resolution,
        dense=args.dense_baseline,
        tol=args.tol,
    )
    if unit == "px":
        logger.info("bench: epsilon is interpreted in pixels of the base resolution")
    for r in rows:
        dense = "-" if np.isnan(r["dense_time"]) else f"{r['dense_time']:.2f}s"
        print(
            f"{r['resolution']:>6d}  pixels {r['pixels']:>8d}  vertices {r['vertices']:>6d}  "
            f"mesh {r['mesh_time']:.2f}s  integrate {r['integrate_time']:.2f}s  dense {dense}"
        )
    if args.report_csv:
        write_rows(args.report_csv, rows, SCALING_FIELDS)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="screenmesh", description="Adaptive screen-space meshing for normal integration.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render an analytic normal map and depth")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--resolution", type=int, default=256)
    for name in ("radius", "a", "b", "s1", "s2", "amplitude", "period", "width"):
        p.add_argument(f"--{name}", type=float, default=None)
    p.add_argument("--pixel-pitch", type=float, default=None)
    p.add_argument("--noise", type=float, default=0.0, help="std of Gaussian noise added to the normals")
    p.add_argument("--seed", type=int, default=0, help="seed for the noise")
    p.add_argument("--out-normals", required=True, help=".png (16 bit) or .pfm")
    p.add_argument("--out-pfm", help="ground-truth depth PFM")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("curvature", help="per-pixel maximum principal curvature")
    p.add_argument("normals")
    _add_camera(p)
    p.add_argument("--no-blur", action="store_true")
    p.add_argument("--out-pfm")
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("mesh", help="adaptive screen-space mesh")
    p.add_argument("normals")
    _add_camera(p)
    _add_sizing(p)
    p.add_argument("--out-obj")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("integrate", help="mesh and integrate a normal map")
    p.add_argument("normals")
    _add_camera(p)
    _add_sizing(p)
    _add_solver(p)
    p.add_argument("--out-obj")
    p.add_argument("--out-pfm")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("pipeline", help="full pipeline with a report")
    p.add_argument("normals")
    _add_camera(p)
    _add_sizing(p)
    _add_solver(p)
    p.add_argument("--gt", help="ground-truth depth PFM for the RMSE")
    p.add_argument("--out-obj")
    p.add_argument("--out-pfm")
    p.add_argument("--report-csv")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("eval", help="aligned RMSE of an OBJ or depth PFM against ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    _add_camera(p)
    p.add_argument("--report-csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="vertex growth over resolutions at fixed physical epsilon")
    p.add_argument("--kind", choices=KINDS, default="sphere")
    p.add_argument("--resolutions", type=int, nargs="+", default=[256, 512, 1024])
    p.add_argument("--base-resolution", type=int, default=256, help="resolution at which scene sizes and epsilon are given")
    p.add_argument("--epsilon", type=parse_epsilon, default=(0.5, "physical"))
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--dense-baseline", action="store_true", help="also time the pixel-grid baseline")
    p.add_argument("--report-csv")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"screenmesh: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

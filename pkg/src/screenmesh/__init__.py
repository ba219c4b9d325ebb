"""Curvature-adaptive screen-space meshing and mesh-based normal integration."""

from .camera import CameraModel
from .diffgeo import CurvatureField, FundamentalForms, curvature_field, fundamental_forms, principal_curvatures
from .estimators import AdaptiveNormalIntegrator, ScreenRemesher, check_normal_map
from .evaluation import EvalReport, pipeline, rmse_aligned, scaling_study
from .halfedge import HalfedgeMesh, MeshError
from .image_io import DepthMap, NormalMap, gaussian_blur_normals, load_normal_map, save_normal_map
from .integrator import ConvergenceError, IntegratedSurface, IntegrationSystem, assemble, integrate, lift, solve
from .remesher import ScreenMesh, SizingConfig, refine
from .synthetic import SyntheticScene, render

__version__ = "0.1.0"

__all__ = [
    "AdaptiveNormalIntegrator",
    "CameraModel",
    "ConvergenceError",
    "CurvatureField",
    "DepthMap",
    "EvalReport",
    "FundamentalForms",
    "HalfedgeMesh",
    "IntegratedSurface",
    "IntegrationSystem",
    "MeshError",
    "NormalMap",
    "ScreenMesh",
    "ScreenRemesher",
    "SizingConfig",
    "SyntheticScene",
    "assemble",
    "check_normal_map",
    "curvature_field",
    "fundamental_forms",
    "gaussian_blur_normals",
    "integrate",
    "lift",
    "load_normal_map",
    "pipeline",
    "principal_curvatures",
    "refine",
    "render",
    "rmse_aligned",
    "save_normal_map",
    "scaling_study",
    "solve",
]

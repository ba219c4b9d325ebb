"""scikit-learn style wrappers around refinement and integration.

The estimators take a normal map (a :class:`NormalMap`, an ``(H, W, 3)``
array, or a ``(normals, mask)`` pair) instead of a feature matrix, so input
checking is done by the helpers below rather than ``check_array``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .camera import CameraModel
from .evaluation import mesh_quality, rasterize_depth, rmse_aligned
from .image_io import DEFAULT_SIGMA, DepthMap, NormalMap
from .integrator import COT_MODES, assemble, integrate_dense_baseline, lift, solve
from .remesher import SizingConfig, refine


def check_normal_map(X, mask=None) -> NormalMap:
    """Coerce ``X`` into a validated :class:`NormalMap`."""
    if isinstance(X, NormalMap):
        if mask is not None:
            return NormalMap.from_arrays(X.normals, X.mask & np.asarray(mask, dtype=bool))
        return X
    if isinstance(X, tuple) and len(X) == 2 and mask is None:
        X, mask = X
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) normal array, got shape {arr.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != arr.shape[:2]:
            raise ValueError("mask shape does not match the normal map")
    nm = NormalMap.from_arrays(arr, mask)
    if nm.n_foreground == 0:
        raise ValueError("normal map has no valid foreground pixels")
    return nm


def check_depth_map(y, mask=None) -> DepthMap:
    if isinstance(y, DepthMap):
        return y
    d = np.asarray(y, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError("depth must be a 2D array")
    m = np.isfinite(d) if mask is None else np.asarray(mask, dtype=bool) & np.isfinite(d)
    return DepthMap(np.where(m, d, 0.0), m)


def check_camera(camera) -> CameraModel:
    if camera is None:
        return CameraModel()
    if not isinstance(camera, CameraModel):
        raise TypeError("camera must be a CameraModel")
    return camera


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class ScreenRemesher(TransformerMixin, BaseEstimator):
    """Curvature-adaptive remeshing of a normal map's foreground.

    ``fit`` builds the mesh (``mesh_``); ``transform`` returns it for the map
    it was fitted on, refitting if a different map is given.
    """

    def __init__(
        self,
        epsilon=0.5,
        l_min=1.0,
        l_max=100.0,
        outer_iterations=10,
        smoothing_iterations=5,
        blur_sigma=DEFAULT_SIGMA,
        flip_metric="first_form",
        camera=None,
    ):
        self.epsilon = epsilon
        self.l_min = l_min
        self.l_max = l_max
        self.outer_iterations = outer_iterations
        self.smoothing_iterations = smoothing_iterations
        self.blur_sigma = blur_sigma
        self.flip_metric = flip_metric
        self.camera = camera

    def _config(self) -> SizingConfig:
        return SizingConfig(
            epsilon=self.epsilon,
            l_min=self.l_min,
            l_max=self.l_max,
            outer_iterations=self.outer_iterations,
            smoothing_iterations=self.smoothing_iterations,
            blur_sigma=self.blur_sigma,
            flip_metric=self.flip_metric,
        )

    def fit(self, X, y=None, mask=None):
        nm = check_normal_map(X, mask)
        self.camera_ = check_camera(self.camera)
        self.mesh_ = refine(nm, self.camera_, self._config())
        self.n_vertices_ = self.mesh_.n_vertices
        self.n_foreground_ = nm.n_foreground
        self._fitted_on = nm
        return self

    def transform(self, X=None):
        _check_fitted(self, "mesh_")
        if X is not None and check_normal_map(X) is not self._fitted_on:
            return self.fit(X).mesh_
        return self.mesh_

    def score(self, X=None, y=None):
        """Fraction of (surface) triangle angles within the quality band."""
        _check_fitted(self, "mesh_")
        return mesh_quality(self.mesh_)[2]


class AdaptiveNormalIntegrator(BaseEstimator):
    """Normal map to depth: remesh (or use the pixel grid), then integrate.

    After ``fit``: ``mesh_``, ``z_`` and ``surface_`` (3D vertex positions).
    ``predict`` rasterises the depth at pixel centres (NaN off the mesh);
    ``score`` is the negative aligned RMSE against a depth map.
    """

    def __init__(
        self,
        epsilon=0.5,
        l_min=1.0,
        l_max=100.0,
        outer_iterations=10,
        smoothing_iterations=5,
        blur_sigma=DEFAULT_SIGMA,
        tol=1e-8,
        cot_mode="metric",
        dense_baseline=False,
        camera=None,
    ):
        self.epsilon = epsilon
        self.l_min = l_min
        self.l_max = l_max
        self.outer_iterations = outer_iterations
        self.smoothing_iterations = smoothing_iterations
        self.blur_sigma = blur_sigma
        self.tol = tol
        self.cot_mode = cot_mode
        self.dense_baseline = dense_baseline
        self.camera = camera

    def fit(self, X, y=None, mask=None):
        if self.cot_mode not in COT_MODES:
            raise ValueError(f"cot_mode must be one of {COT_MODES}")
        nm = check_normal_map(X, mask)
        cam = check_camera(self.camera)
        if self.dense_baseline:
            mesh, z = integrate_dense_baseline(nm, cam, self.tol, self.cot_mode)
        else:
            cfg = SizingConfig(
                epsilon=self.epsilon,
                l_min=self.l_min,
                l_max=self.l_max,
                outer_iterations=self.outer_iterations,
                smoothing_iterations=self.smoothing_iterations,
                blur_sigma=self.blur_sigma,
            )
            mesh = refine(nm, cam, cfg)
            z = solve(assemble(mesh, cam, self.cot_mode), self.tol)
        self.camera_ = cam
        self.mesh_ = mesh
        self.z_ = z
        self.surface_ = lift(mesh, z, cam)
        self.mask_ = nm.mask.copy()
        return self

    def predict(self, X=None):
        _check_fitted(self, "surface_")
        mask = self.mask_ if X is None else check_normal_map(X).mask
        return rasterize_depth(self.surface_, mask)

    def score(self, X, y):
        """Negative RMSE (after alignment) of the fitted surface against depth ``y``."""
        _check_fitted(self, "surface_")
        gt = check_depth_map(y)
        return -rmse_aligned(self.surface_, gt, self.camera_).rmse

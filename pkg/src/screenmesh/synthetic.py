"""Analytic test scenes: exact normals and exact depth for orthographic cameras.

Scene geometry is given in pixels. Depth maps are returned in physical units
(pixel depth times the camera's pixel pitch) so they can be compared directly
with lifted surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel
from .diffgeo import pixel_centers
from .image_io import DepthMap, NormalMap

KINDS = ("plane", "sphere", "cylinder", "wedge", "sinusoid", "bump")


@dataclass
class SyntheticScene:
    """An analytic height field ``h(u, v)`` over an image of ``resolution`` pixels.

    ``params`` depends on ``kind``:

    ``plane``     a, b (slopes; ``h = a x + b y``)
    ``sphere``    radius, center (defaults to the image centre)
    ``cylinder``  radius, axis ("v": axis along image rows, normals vary in u)
    ``wedge``     s1, s2, crease (u coordinate of the crease, default centre)
    ``sinusoid``  amplitude, period
    ``bump``      amplitude, width (Gaussian bump on a plane with slopes a, b)

    ``x`` and ``y`` are screen coordinates relative to the image centre (or
    the given centre).
    """

    kind: str
    resolution: tuple[int, int] = (256, 256)
    params: dict = field(default_factory=dict)
    camera: CameraModel = field(default_factory=CameraModel)
    mask: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}; choose from {KINDS}")
        if isinstance(self.resolution, int):
            self.resolution = (self.resolution, self.resolution)
        H, W = self.resolution
        if H < 1 or W < 1:
            raise ValueError("resolution must be positive")
        if self.camera.is_perspective:
            raise ValueError("synthetic scenes are rendered with an orthographic camera")
        p = self.params
        if self.kind in ("sphere", "cylinder") and not p.get("radius", 0) > 0:
            raise ValueError("radius must be positive")
        if self.kind == "wedge":
            if max(abs(p.get("s1", 1.0)), abs(p.get("s2", -1.0))) >= 10:
                raise ValueError("wedge slopes must satisfy |s| < 10")
        if self.kind == "sinusoid" and not p.get("period", 0) > 2:
            raise ValueError("period must exceed 2 pixels")
        if self.kind == "bump" and not p.get("width", 0) > 0:
            raise ValueError("bump width must be positive")


def _offsets(scene: SyntheticScene):
    H, W = scene.resolution
    uv = pixel_centers(H, W)
    cx, cy = scene.params.get("center", (W / 2.0, H / 2.0))
    return uv[..., 0] - cx, uv[..., 1] - cy


def height_and_gradient(scene: SyntheticScene):
    """Analytic ``h``, ``dh/du``, ``dh/dv`` and the natural foreground mask."""
    x, y = _offsets(scene)
    p = scene.params
    full = np.ones(x.shape, dtype=bool)
    kind = scene.kind
    if kind == "plane":
        a, b = p.get("a", 0.0), p.get("b", 0.0)
        h = a * x + b * y
        return h, np.full(x.shape, a), np.full(x.shape, b), full
    if kind == "sphere":
        R = p["radius"]
        rho2 = x * x + y * y
        mask = rho2 < R * R
        h = np.sqrt(np.maximum(R * R - rho2, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            hu = np.where(mask, -x / h, 0.0)
            hv = np.where(mask, -y / h, 0.0)
        return h, hu, hv, mask
    if kind == "cylinder":
        R = p["radius"]
        s = x if p.get("axis", "v") == "v" else y
        mask = np.abs(s) < R
        h = np.sqrt(np.maximum(R * R - s * s, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            hs = np.where(mask, -s / h, 0.0)
        zero = np.zeros(x.shape)
        return (h, hs, zero, mask) if p.get("axis", "v") == "v" else (h, zero, hs, mask)
    if kind == "wedge":
        s1, s2 = p.get("s1", 1.0), p.get("s2", -1.0)
        crease = p.get("crease", scene.resolution[1] / 2.0)
        uv = pixel_centers(*scene.resolution)
        xu = uv[..., 0] - crease
        slope = np.where(xu < 0, s1, s2)
        return slope * xu, slope, np.zeros(x.shape), full
    if kind == "sinusoid":
        A, P = p.get("amplitude", 5.0), p["period"]
        k = 2.0 * np.pi / P
        h = A * np.sin(k * x) * np.sin(k * y)
        return h, A * k * np.cos(k * x) * np.sin(k * y), A * k * np.sin(k * x) * np.cos(k * y), full
    # bump
    A, s = p.get("amplitude", 10.0), p["width"]
    a, b = p.get("a", 0.0), p.get("b", 0.0)
    g = A * np.exp(-(x * x + y * y) / (2.0 * s * s))
    return a * x + b * y + g, a - g * x / (s * s), b - g * y / (s * s), full


def render(scene: SyntheticScene) -> tuple[NormalMap, DepthMap]:
    """Exact normals ``(-h_u, -h_v, 1)/|.|`` and depth on the scene's foreground."""
    h, hu, hv, mask = height_and_gradient(scene)
    if scene.mask is not None:
        mask = mask & np.asarray(scene.mask, dtype=bool)
    n = np.stack([-hu, -hv, np.ones(h.shape)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    nm = NormalMap.from_arrays(n, mask)
    pitch = scene.camera.pixel_pitch
    depth = DepthMap(np.where(nm.mask, h * pitch, 0.0), nm.mask.copy())
    return nm, depth


def sphere(resolution=256, radius=100.0, **kw) -> SyntheticScene:
    return SyntheticScene("sphere", resolution, {"radius": radius, **kw})


def plane(resolution=128, a=0.0, b=0.0) -> SyntheticScene:
    return SyntheticScene("plane", resolution, {"a": a, "b": b})


def wedge(resolution=256, s1=1.0, s2=-1.0, **kw) -> SyntheticScene:
    return SyntheticScene("wedge", resolution, {"s1": s1, "s2": s2, **kw})


def cylinder(resolution=256, radius=100.0, axis="v") -> SyntheticScene:
    return SyntheticScene("cylinder", resolution, {"radius": radius, "axis": axis})


DEFAULT_PARAMS = {
    "plane": {"a": 0.3, "b": -0.2},
    "sphere": {"radius": 100.0},
    "cylinder": {"radius": 100.0, "axis": "v"},
    "wedge": {"s1": 1.0, "s2": -1.0},
    "sinusoid": {"amplitude": 5.0, "period": 64.0},
    "bump": {"amplitude": 20.0, "width": 24.0},
}
_LENGTH_PARAMS = ("radius", "amplitude", "period", "width", "crease")


def scaled_scene(kind: str, resolution: int, base_resolution: int = 256, **params) -> SyntheticScene:
    """The same physical scene sampled at ``resolution`` pixels per side.

    ``params`` are given in pixels of the ``base_resolution`` image; the
    camera's pixel pitch is ``base_resolution / resolution``, so the physical
    extent of the image and of the object stay fixed.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown scene kind {kind!r}; choose from {KINDS}")
    p = {**DEFAULT_PARAMS[kind], **params}
    scale = resolution / base_resolution
    for key in _LENGTH_PARAMS:
        if key in p:
            p[key] = p[key] * scale
    if "center" in p:
        p["center"] = tuple(c * scale for c in p["center"])
    cam = CameraModel.orthographic(base_resolution / resolution)
    return SyntheticScene(kind, (resolution, resolution), p, cam)

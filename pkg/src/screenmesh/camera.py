"""Projection models and pixel/physical unit conversion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CameraModel:
    """Orthographic or weak-perspective camera.

    Parameters
    ----------
    kind : {"orthographic", "perspective"}
    intrinsics : (3, 3) array, optional
        Camera matrix ``C``; required for ``"perspective"``.
    mean_distance : float, optional
        Average camera-to-object distance used by the weak-perspective
        tangents; required for ``"perspective"``.
    pixel_pitch : float, optional
        Physical length of one pixel at the object. For perspective cameras
        it defaults to ``mean_distance / focal_length``.
    """

    kind: str = "orthographic"
    intrinsics: np.ndarray | None = field(default=None, compare=False)
    mean_distance: float | None = None
    pixel_pitch: float | None = None

    def __post_init__(self):
        if self.kind not in ("orthographic", "perspective"):
            raise ValueError(f"unknown camera kind {self.kind!r}")
        if self.kind == "orthographic":
            pitch = 1.0 if self.pixel_pitch is None else float(self.pixel_pitch)
            object.__setattr__(self, "pixel_pitch", pitch)
        else:
            if self.intrinsics is None or self.mean_distance is None:
                raise ValueError("perspective cameras need intrinsics and mean_distance")
            C = np.array(self.intrinsics, dtype=np.float64).reshape(3, 3)
            if abs(np.linalg.det(C)) < 1e-12:
                raise ValueError("intrinsics must be invertible")
            C.setflags(write=False)
            object.__setattr__(self, "intrinsics", C)
            object.__setattr__(self, "mean_distance", float(self.mean_distance))
            if self.mean_distance <= 0:
                raise ValueError("mean_distance must be positive")
            if self.pixel_pitch is None:
                object.__setattr__(self, "pixel_pitch", self.mean_distance / self.focal_length)
            else:
                object.__setattr__(self, "pixel_pitch", float(self.pixel_pitch))
        if self.pixel_pitch <= 0:
            raise ValueError("pixel_pitch must be positive")

    @classmethod
    def orthographic(cls, pixel_pitch: float = 1.0) -> "CameraModel":
        return cls("orthographic", pixel_pitch=pixel_pitch)

    @classmethod
    def perspective(cls, fx, fy, cx, cy, mean_distance, pixel_pitch=None) -> "CameraModel":
        C = np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
        return cls("perspective", C, mean_distance, pixel_pitch)

    @property
    def is_perspective(self) -> bool:
        return self.kind == "perspective"

    @property
    def focal_length(self) -> float:
        """Mean of the two focal lengths in pixels (perspective only)."""
        C = self.intrinsics
        return 0.5 * (C[0, 0] + C[1, 1])

    @property
    def inverse_intrinsics(self) -> np.ndarray:
        return np.linalg.inv(self.intrinsics)

    def ray(self, u) -> np.ndarray:
        """Unnormalised ray(s) through screen position(s) ``u`` of shape ``(..., 2)``."""
        u = np.asarray(u, dtype=np.float64)
        if not self.is_perspective:
            return np.broadcast_to(np.array([0.0, 0.0, 1.0]), u.shape[:-1] + (3,)).copy()
        homog = np.concatenate([u, np.ones(u.shape[:-1] + (1,))], axis=-1)
        return homog @ self.inverse_intrinsics.T

    def ray_derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        """``d ray / du`` and ``d ray / dv``; constant over the image.

        For the orthographic model these are ``e_x`` and ``e_y``, which makes the
        tangent and integration formulas identical for both projections.
        """
        if not self.is_perspective:
            return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
        Ci = self.inverse_intrinsics
        return Ci[:, 0].copy(), Ci[:, 1].copy()

    def pixel_to_physical(self, length_px):
        return np.multiply(length_px, self.pixel_pitch)

    def physical_to_pixel(self, length):
        return np.divide(length, self.pixel_pitch)


def parse_intrinsics(values) -> np.ndarray:
    """Accept ``fx fy cx cy`` or nine row-major numbers."""
    vals = [float(v) for v in values]
    if len(vals) == 4:
        fx, fy, cx, cy = vals
        return np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
    if len(vals) == 9:
        return np.array(vals).reshape(3, 3)
    raise ValueError("intrinsics need 4 (fx fy cx cy) or 9 (row-major) numbers")


def read_intrinsics_file(path) -> np.ndarray:
    """Read nine whitespace-separated numbers (``#`` starts a comment)."""
    tokens = []
    with open(path) as fh:
        for line in fh:
            tokens.extend(line.split("#", 1)[0].split())
    return parse_intrinsics(tokens)

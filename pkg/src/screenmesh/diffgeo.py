"""Tangents, fundamental forms and principal curvatures from normals alone.

All lengths are measured in pixels: the first fundamental form maps a screen
displacement (in pixels) to a squared 3D length expressed in pixel units, so a
fronto-parallel surface has ``I = identity`` under either projection, and
curvatures come out in 1/pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraModel
from .image_io import MIN_NZ, NormalMap

#: Rays closer than this (relative) to the tangent plane are treated as grazing.
GRAZING_RAY = 1e-3
#: Metrics with ``det I`` at or below this value are degenerate.
MIN_METRIC_DET = 1e-12


@dataclass
class FundamentalForms:
    first: np.ndarray
    second: np.ndarray


@dataclass
class CurvatureField:
    kappa_max: np.ndarray
    mask: np.ndarray
    k1: np.ndarray | None = None
    k2: np.ndarray | None = None

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]


def tangents_orthographic(n):
    """Surface tangents ``d x / du`` and ``d x / dv`` for ``x = (u, v, h(u, v))``.

    ``n`` has shape ``(..., 3)``; ``n_z`` is clamped to ``MIN_NZ`` from below.
    """
    n = np.asarray(n, dtype=np.float64)
    nz = np.maximum(n[..., 2], MIN_NZ)
    t_u = np.zeros(n.shape)
    t_v = np.zeros(n.shape)
    t_u[..., 0] = 1.0
    t_u[..., 2] = -n[..., 0] / nz
    t_v[..., 1] = 1.0
    t_v[..., 2] = -n[..., 1] / nz
    return t_u, t_v


def tangents_perspective(n, r, dr_u, dr_v, z_bar):
    """Weak-perspective tangents ``(dr_i - (n.dr_i / n.r) r) * z_bar``.

    Shapes broadcast over the leading axes; the last axis has length 3.
    """
    n = np.asarray(n, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    n_r = np.sum(n * r, axis=-1, keepdims=True)
    # n.r == 0 only for background sentinels and exact grazing rays; both are masked later
    n_r = np.where(n_r == 0.0, 1.0, n_r)
    out = []
    for dr in (dr_u, dr_v):
        dr = np.asarray(dr, dtype=np.float64)
        n_dr = np.sum(n * dr, axis=-1, keepdims=True)
        out.append((dr - (n_dr / n_r) * r) * z_bar)
    return out[0], out[1]


def grazing_rays(n, r) -> np.ndarray:
    n_r = np.abs(np.sum(n * r, axis=-1))
    return n_r < GRAZING_RAY * np.linalg.norm(r, axis=-1)


def tangents(n, cam: CameraModel, u=None):
    """Pixel-scaled tangents for either projection.

    For perspective cameras the tangents are divided by the pixel pitch, so
    that their lengths are expressed in pixels per pixel. ``u`` holds the
    screen positions at which rays are evaluated (ignored for orthographic).
    """
    if not cam.is_perspective:
        return tangents_orthographic(n)
    r = cam.ray(u)
    dr_u, dr_v = cam.ray_derivatives()
    t_u, t_v = tangents_perspective(n, r, dr_u, dr_v, cam.mean_distance)
    return t_u / cam.pixel_pitch, t_v / cam.pixel_pitch


def first_form_from_tangents(t_u, t_v) -> np.ndarray:
    """Stack ``I`` as ``(..., 2, 2)``."""
    I = np.empty(t_u.shape[:-1] + (2, 2))
    I[..., 0, 0] = np.sum(t_u * t_u, axis=-1)
    I[..., 0, 1] = I[..., 1, 0] = np.sum(t_u * t_v, axis=-1)
    I[..., 1, 1] = np.sum(t_v * t_v, axis=-1)
    return I


def pixel_centers(height: int, width: int) -> np.ndarray:
    """Screen coordinates of all pixel centres, shape ``(H, W, 2)`` as ``(u, v)``."""
    vv, uu = np.mgrid[0:height, 0:width]
    return np.stack([uu + 0.5, vv + 0.5], axis=-1).astype(np.float64)


def normal_gradients(normals: np.ndarray, mask: np.ndarray):
    """Masked finite differences of a normal field along ``u`` (columns) and ``v`` (rows).

    Central differences where both neighbours are foreground, one-sided where
    only one is, zero where neither is. Background pixels get zero.
    """
    n = np.where(mask[..., None], normals, 0.0)
    grads = []
    for axis in (1, 0):
        nxt = np.zeros_like(n)
        prv = np.zeros_like(n)
        m_nxt = np.zeros_like(mask)
        m_prv = np.zeros_like(mask)
        if axis == 1:
            nxt[:, :-1] = n[:, 1:]
            prv[:, 1:] = n[:, :-1]
            m_nxt[:, :-1] = mask[:, 1:]
            m_prv[:, 1:] = mask[:, :-1]
        else:
            nxt[:-1] = n[1:]
            prv[1:] = n[:-1]
            m_nxt[:-1] = mask[1:]
            m_prv[1:] = mask[:-1]
        both = (m_nxt & m_prv)[..., None]
        only_nxt = (m_nxt & ~m_prv)[..., None]
        only_prv = (m_prv & ~m_nxt)[..., None]
        g = np.where(both, 0.5 * (nxt - prv), 0.0)
        g = np.where(only_nxt, nxt - n, g)
        g = np.where(only_prv, n - prv, g)
        g[~mask] = 0.0
        grads.append(g)
    return grads[0], grads[1]


def fundamental_forms(nm: NormalMap, cam: CameraModel):
    """Per-pixel ``I`` and symmetrised ``II`` as ``(H, W, 2, 2)`` arrays plus a validity mask.

    Invalid pixels are background pixels, grazing rays (perspective) and
    degenerate metrics.
    """
    n = nm.normals
    centers = pixel_centers(*nm.shape)
    t_u, t_v = tangents(n, cam, centers)
    I = first_form_from_tangents(t_u, t_v)
    dn_u, dn_v = normal_gradients(n, nm.mask)
    II = np.empty_like(I)
    II[..., 0, 0] = -np.sum(t_u * dn_u, axis=-1)
    II[..., 1, 1] = -np.sum(t_v * dn_v, axis=-1)
    off = -0.5 * (np.sum(t_u * dn_v, axis=-1) + np.sum(t_v * dn_u, axis=-1))
    II[..., 0, 1] = II[..., 1, 0] = off
    valid = nm.mask.copy()
    if cam.is_perspective:
        valid &= ~grazing_rays(n, cam.ray(centers))
    valid &= np.linalg.det(I) > MIN_METRIC_DET
    return I, II, valid


def fundamental_forms_at(nm: NormalMap, cam: CameraModel, p) -> FundamentalForms:
    """Fundamental forms at pixel ``p = (row, col)``."""
    r, c = p
    lo_r, hi_r = max(r - 1, 0), min(r + 2, nm.height)
    lo_c, hi_c = max(c - 1, 0), min(c + 2, nm.width)
    sub = NormalMap(nm.normals[lo_r:hi_r, lo_c:hi_c], nm.mask[lo_r:hi_r, lo_c:hi_c])
    I, II, _ = fundamental_forms(sub, _shift_camera(cam, lo_c, lo_r))
    return FundamentalForms(I[r - lo_r, c - lo_c].copy(), II[r - lo_r, c - lo_c].copy())


def _shift_camera(cam: CameraModel, du: float, dv: float) -> CameraModel:
    if not cam.is_perspective:
        return cam
    C = np.array(cam.intrinsics)
    C[0, 2] -= du
    C[1, 2] -= dv
    return CameraModel("perspective", C, cam.mean_distance, cam.pixel_pitch)


def principal_curvatures(first, second=None):
    """Generalised eigenvalues of ``k I v = II v`` in closed form, ``k1 >= k2``.

    Accepts a :class:`FundamentalForms` as the single argument or two arrays of
    shape ``(..., 2, 2)``.
    """
    if isinstance(first, FundamentalForms):
        first, second = first.first, first.second
    I = np.asarray(first, dtype=np.float64)
    II = np.asarray(second, dtype=np.float64)
    a = I[..., 0, 0] * I[..., 1, 1] - I[..., 0, 1] ** 2
    b = -(I[..., 0, 0] * II[..., 1, 1] + I[..., 1, 1] * II[..., 0, 0] - 2.0 * I[..., 0, 1] * II[..., 0, 1])
    c = II[..., 0, 0] * II[..., 1, 1] - II[..., 0, 1] ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        H = -b / (2.0 * a)
        K = c / a
    root = np.sqrt(np.maximum(H * H - K, 0.0))
    return H + root, H - root


def curvature_field(nm: NormalMap, cam: CameraModel) -> CurvatureField:
    """Per-pixel maximum absolute principal curvature.

    Degenerate foreground pixels take the largest value among their valid
    4-neighbours, or 0 if there is none.
    """
    I, II, valid = fundamental_forms(nm, cam)
    k1, k2 = principal_curvatures(I, II)
    kmax = np.maximum(np.abs(k1), np.abs(k2))
    valid &= np.isfinite(kmax)
    kmax = np.where(valid, kmax, 0.0)

    holes = nm.mask & ~valid
    if holes.any():
        padded = np.pad(np.where(valid, kmax, -1.0), 1, constant_values=-1.0)
        neigh = np.maximum.reduce(
            [padded[:-2, 1:-1], padded[2:, 1:-1], padded[1:-1, :-2], padded[1:-1, 2:]]
        )
        kmax = np.where(holes, np.maximum(neigh, 0.0), kmax)
    kmax[~nm.mask] = 0.0
    k1 = np.where(valid, k1, 0.0)
    k2 = np.where(valid, k2, 0.0)
    return CurvatureField(kmax, nm.mask.copy(), k1, k2)

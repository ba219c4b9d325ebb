"""Mesh-based normal integration: a cotangent system over per-vertex depth.

Per face ``f`` with normal ``n_f`` and opposite-corner cotangents ``c_e`` the
discrete energy is

    E_f(z) = m_f * sum_e c_e (z_i - z_j)^2 + b_f * sum_e c_e (z_j - z_i) g_f . (u_j - u_i)

where ``g_f = (n_f . dr/du, n_f . dr/dv)`` (the screen part of the normal
under an orthographic camera). Its minimiser solves ``A z = rhs``, the
assembled system. ``z`` is depth in pixels for orthographic cameras and
log-depth for perspective ones.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import cg

from .camera import CameraModel
from .halfedge import MIN_AREA, signed_areas
from .image_io import NormalMap
from .remesher import ScreenMesh, pixel_grid_mesh

logger = logging.getLogger(__name__)

#: Bound on the magnitude of a single cotangent weight.
MAX_COT = 1e6
#: Lower clamp for the squared sine term of a cotangent.
MIN_SIN2 = 1e-18
COT_MODES = ("metric", "screen")


class ConvergenceError(RuntimeError):
    """The iterative solver stopped before reaching the requested residual."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(f"CG did not converge: relative residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


@dataclass
class IntegrationSystem:
    """Sparse symmetric system ``matrix @ z = rhs`` with component labels."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    components: np.ndarray
    n_components: int
    skipped_faces: int = 0

    @property
    def n_vertices(self) -> int:
        return self.matrix.shape[0]


@dataclass
class IntegratedSurface:
    """Triangle mesh with per-vertex 3D positions in physical units."""

    positions: np.ndarray
    faces: np.ndarray
    screen: np.ndarray
    z: np.ndarray

    @property
    def depth(self) -> np.ndarray:
        """Per-vertex depth along the optical axis (physical units)."""
        return self.positions[:, 2]


def face_constants(normals, rays):
    """``(m_f, b_f)`` from face normals ``(F, 3)`` and vertex rays ``(F, 3, 3)``.

    ``m_f`` averages ``(n.r_i)(n.r_j)`` over the six pairs ``i <= j`` (divided
    by 12) and ``b_f`` is the mean of ``n.r_i``.
    """
    n = np.asarray(normals, dtype=np.float64)
    r = np.asarray(rays, dtype=np.float64)
    d = np.einsum("...k,...ik->...i", n, r)
    s = d.sum(axis=-1)
    m = 0.5 * (s * s + np.sum(d * d, axis=-1)) / 12.0
    return m, s / 3.0


def cot_opposite_angle(a, b, first_form=None):
    """Cotangent of the angle between corner edge vectors ``a`` and ``b``.

    ``first_form`` is ``(I11, I12, I22)`` (broadcastable); ``None`` measures
    the angle in plain screen coordinates.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if first_form is None:
        ab = a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]
        aa = a[..., 0] ** 2 + a[..., 1] ** 2
        bb = b[..., 0] ** 2 + b[..., 1] ** 2
    else:
        I = np.asarray(first_form, dtype=np.float64)
        g11, g12, g22 = I[..., 0], I[..., 1], I[..., 2]
        ab = g11 * a[..., 0] * b[..., 0] + g12 * (a[..., 0] * b[..., 1] + a[..., 1] * b[..., 0]) + g22 * a[..., 1] * b[..., 1]
        aa = g11 * a[..., 0] ** 2 + 2.0 * g12 * a[..., 0] * a[..., 1] + g22 * a[..., 1] ** 2
        bb = g11 * b[..., 0] ** 2 + 2.0 * g12 * b[..., 0] * b[..., 1] + g22 * b[..., 1] ** 2
    sin = np.sqrt(np.maximum(aa * bb - ab * ab, MIN_SIN2))
    return np.clip(ab / sin, -MAX_COT, MAX_COT)


def _face_terms(verts, faces, normals, first_forms, cam: CameraModel, cot_mode: str):
    """Per-face cotangents ``(F, 3)`` (opposite corner k), ``m_f``, ``b_f`` and ``g_f``."""
    P = verts[faces]
    cots = np.empty((len(faces), 3))
    I = None if cot_mode == "screen" else first_forms
    for k in range(3):
        o = P[:, k]
        cots[:, k] = cot_opposite_angle(P[:, (k + 1) % 3] - o, P[:, (k + 2) % 3] - o, I)
    rays = cam.ray(P.reshape(-1, 2)).reshape(len(faces), 3, 3)
    m, b = face_constants(normals, rays)
    dr_u, dr_v = cam.ray_derivatives()
    g = np.column_stack([normals @ dr_u, normals @ dr_v])
    return cots, m, b, g


def assemble(mesh: ScreenMesh, cam: CameraModel | None = None, cot_mode: str = "metric") -> IntegrationSystem:
    """Build the sparse system for ``mesh``.

    ``cot_mode="metric"`` measures the cotangent weights in each face's first
    fundamental form; ``"screen"`` uses raw screen angles. Faces with
    (near-)zero screen area are skipped and counted.
    """
    if cot_mode not in COT_MODES:
        raise ValueError(f"cot_mode must be one of {COT_MODES}")
    cam = cam or CameraModel()
    verts = np.asarray(mesh.verts, dtype=np.float64)
    faces = np.asarray(mesh.faces, dtype=np.int64)
    nv = len(verts)

    keep = np.abs(signed_areas(verts, faces)) > MIN_AREA
    skipped = int((~keep).sum())
    if skipped:
        logger.warning("assemble: skipped %d degenerate faces", skipped)
    faces = faces[keep]
    normals = np.asarray(mesh.face_normals, dtype=np.float64)[keep]
    first_forms = np.asarray(mesh.first_forms, dtype=np.float64)[keep]
    cots, m, b, g = _face_terms(verts, faces, normals, first_forms, cam, cot_mode)

    rows, cols, vals = [], [], []
    rhs = np.zeros(nv)
    for k in range(3):
        i = faces[:, (k + 1) % 3]
        j = faces[:, (k + 2) % 3]
        w = 2.0 * cots[:, k] * m
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [w, w, -w, -w]
        du = verts[j] - verts[i]
        t = cots[:, k] * b * np.sum(g * du, axis=1)
        rhs += np.bincount(i, weights=t, minlength=nv)
        rhs -= np.bincount(j, weights=t, minlength=nv)
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nv, nv)
    ).tocsr()
    A.sum_duplicates()
    pattern = sp.coo_matrix(
        (np.ones(3 * len(faces)), (faces.reshape(-1), np.roll(faces, -1, axis=1).reshape(-1))), shape=(nv, nv)
    )
    n_comp, labels = connected_components(pattern, directed=False)
    return IntegrationSystem(A, rhs, labels, int(n_comp), skipped)


def energy(mesh: ScreenMesh, z, cam: CameraModel | None = None, cot_mode: str = "metric") -> float:
    """Discrete integration energy, summed face by face (reference for gradient checks)."""
    cam = cam or CameraModel()
    verts = np.asarray(mesh.verts, dtype=np.float64)
    faces = np.asarray(mesh.faces, dtype=np.int64)
    keep = np.abs(signed_areas(verts, faces)) > MIN_AREA
    faces = faces[keep]
    normals = np.asarray(mesh.face_normals, dtype=np.float64)[keep]
    cots, m, b, g = _face_terms(verts, faces, normals, np.asarray(mesh.first_forms)[keep], cam, cot_mode)
    z = np.asarray(z, dtype=np.float64)
    total = 0.0
    for k in range(3):
        i = faces[:, (k + 1) % 3]
        j = faces[:, (k + 2) % 3]
        dz = z[j] - z[i]
        du = verts[j] - verts[i]
        total += np.sum(cots[:, k] * (m * dz * dz + b * dz * np.sum(g * du, axis=1)))
    return float(total)


def _remove_component_means(x, labels, n_comp):
    counts = np.bincount(labels, minlength=n_comp)
    means = np.bincount(labels, weights=x, minlength=n_comp) / np.maximum(counts, 1)
    return x - means[labels]


def solve(system: IntegrationSystem, tol: float = 1e-8, maxiter: int | None = None) -> np.ndarray:
    """Solve with Jacobi-preconditioned CG; each component's solution has mean 0.

    Raises :class:`ConvergenceError` if the relative residual stays above
    ``tol`` after ``maxiter`` (default ``10 * V``) iterations.
    """
    A = system.matrix
    nv = A.shape[0]
    labels, n_comp = system.components, system.n_components
    # the rhs is a sum of antisymmetric pairs; removing rounding drift keeps it in range(A)
    b = _remove_component_means(system.rhs, labels, n_comp)
    bnorm = np.linalg.norm(b)
    if nv == 0 or bnorm == 0.0:
        return np.zeros(nv)
    diag = A.diagonal()
    inv = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    M = sp.diags(inv)
    maxiter = maxiter if maxiter is not None else 10 * nv
    n_iter = 0

    def count(_):
        nonlocal n_iter
        n_iter += 1

    x, _ = cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=count)
    x = _remove_component_means(x, labels, n_comp)
    res = np.linalg.norm(b - A @ x) / bnorm
    if not np.isfinite(res) or res > tol:
        raise ConvergenceError(float(res), n_iter)
    logger.debug("solve: %d iterations, relative residual %.3e", n_iter, res)
    return x


def lift(mesh: ScreenMesh, z, cam: CameraModel | None = None) -> IntegratedSurface:
    """3D vertex positions from solved ``z``.

    Orthographic: ``(u, v, z) * pitch``. Perspective: depth
    ``z_bar * exp(z - mean(z))`` along each vertex ray.
    """
    cam = cam or CameraModel()
    verts = np.asarray(mesh.verts, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if cam.is_perspective:
        h = cam.mean_distance * np.exp(z - z.mean()) if len(z) else z
        pos = cam.ray(verts) * h[:, None]
    else:
        pos = np.column_stack([verts, z]) * cam.pixel_pitch
    return IntegratedSurface(pos, np.asarray(mesh.faces, dtype=np.int64).copy(), verts.copy(), z.copy())


def integrate(mesh: ScreenMesh, cam: CameraModel | None = None, tol: float = 1e-8, cot_mode: str = "metric"):
    """assemble, solve and lift in one call; returns ``(IntegratedSurface, z)``."""
    system = assemble(mesh, cam, cot_mode)
    z = solve(system, tol)
    return lift(mesh, z, cam), z


def integrate_dense_baseline(nm: NormalMap, cam: CameraModel | None = None, tol: float = 1e-8, cot_mode: str = "metric"):
    """Integrate on the unrefined pixel grid; returns ``(ScreenMesh, z)``."""
    mesh = pixel_grid_mesh(nm, cam)
    z = solve(assemble(mesh, cam, cot_mode), tol)
    return mesh, z

"""Curvature-adaptive isotropic remeshing of the image domain.

The loop follows the classic incremental remeshing scheme (split long edges,
collapse short ones, flip to Delaunay, smooth tangentially) but measures edge
lengths through each face's first fundamental form, so that the target
lengths refer to the 3D surface rather than to the screen. Boundary vertices
stay on the outline of the initial pixel mesh, and boundary edits may not
uncover more than one foreground pixel centre per chord.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .camera import CameraModel
from .diffgeo import CurvatureField, curvature_field, first_form_from_tangents, tangents
from .halfedge import MIN_AREA, HalfedgeMesh, signed_area, signed_areas
from .image_io import DEFAULT_SIGMA, NormalMap, gaussian_blur_normals
from .raster import rasterize

logger = logging.getLogger(__name__)


@dataclass
class SizingConfig:
    """Remeshing parameters. All lengths are in pixels.

    ``epsilon`` is the permitted approximation error; use
    :meth:`from_physical` to convert a physical tolerance with a camera.
    """

    epsilon: float = 0.5
    l_min: float = 1.0
    l_max: float = 100.0
    outer_iterations: int = 10
    smoothing_iterations: int = 5
    split_factor: float = 4.0 / 3.0
    collapse_factor: float = 4.0 / 5.0
    blur_sigma: float | None = DEFAULT_SIGMA
    flip_metric: str = "first_form"
    boundary_tolerance: float = math.sqrt(2.0)
    boundary_max_uncovered: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.l_min < self.l_max:
            raise ValueError("need 0 < l_min < l_max")
        if self.outer_iterations < 0 or self.smoothing_iterations < 0:
            raise ValueError("iteration counts must be non-negative")
        if self.boundary_tolerance < 0 or self.boundary_max_uncovered < 0:
            raise ValueError("boundary limits must be non-negative")
        if self.flip_metric not in ("screen", "first_form"):
            raise ValueError("flip_metric must be 'screen' or 'first_form'")

    @classmethod
    def from_physical(cls, epsilon: float, camera: CameraModel, **kwargs) -> "SizingConfig":
        return cls(epsilon=float(camera.physical_to_pixel(epsilon)), **kwargs)


@dataclass
class ScreenMesh:
    """Array snapshot of a remeshed screen triangulation.

    ``first_forms`` stores ``(I11, I12, I22)`` per face; ``face_of_pixel`` is
    the rasterisation the cached face data were computed from.
    """

    verts: np.ndarray
    faces: np.ndarray
    face_normals: np.ndarray
    first_forms: np.ndarray
    L: np.ndarray
    kappa: np.ndarray
    boundary: np.ndarray
    face_of_pixel: np.ndarray | None = None
    halfedge: HalfedgeMesh | None = field(default=None, repr=False)
    history: list = field(default_factory=list, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.verts)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def edges(self) -> np.ndarray:
        e = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def angles(self, metric: bool = False) -> np.ndarray:
        """Interior angles in degrees, shape ``(F, 3)``; ``metric`` measures them in ``I_f``."""
        return face_angles(self.verts, self.faces, self.first_forms if metric else None)


# --------------------------------------------------------------------------
# sizing


def optimal_length(kappa, epsilon: float, l_min: float = 1.0, l_max: float = 100.0):
    """``sqrt(6 eps / |kappa| - eps^2)`` clamped to ``[l_min, l_max]``.

    Zero curvature gives ``l_max``; a non-positive radicand gives ``l_min``.
    """
    k = np.abs(np.asarray(kappa, dtype=np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        rad = 6.0 * epsilon / k - epsilon**2
        L = np.sqrt(np.where(rad > 0, rad, 0.0))
    L = np.where(k == 0, l_max, np.where(rad <= 0, l_min, L))
    return np.clip(L, l_min, l_max)


# --------------------------------------------------------------------------
# initial mesh


def initial_triangulation(mask):
    """Two triangles per foreground pixel on the pixel-corner lattice.

    Pixel ``(r, c)`` spans corners ``(c, r)`` to ``(c + 1, r + 1)`` in screen
    coordinates and is cut along that diagonal. Corners where two foreground
    pixels touch only diagonally are duplicated so the result is manifold.
    Returns ``(verts, faces)``.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty mask")
    H, W = mask.shape
    pad = np.zeros((H + 2, W + 2), dtype=bool)
    pad[1:-1, 1:-1] = mask
    # pixels around corner (r, c): TL=(r-1,c-1) TR=(r-1,c) BL=(r,c-1) BR=(r,c)
    TL = pad[:-1, :-1]
    TR = pad[:-1, 1:]
    BL = pad[1:, :-1]
    BR = pad[1:, 1:]
    used = TL | TR | BL | BR
    diag_a = TL & BR & ~TR & ~BL
    diag_b = TR & BL & ~TL & ~BR

    ids = np.full((H + 1, W + 1), -1, dtype=np.int64)
    n_primary = int(used.sum())
    ids[used] = np.arange(n_primary)
    dup = np.full((H + 1, W + 1), -1, dtype=np.int64)
    nonman = diag_a | diag_b
    dup[nonman] = n_primary + np.arange(int(nonman.sum()))
    rr, cc = np.nonzero(used)
    dr, dc = np.nonzero(nonman)
    verts = np.concatenate(
        [np.column_stack([cc, rr]), np.column_stack([dc, dr])]
    ).astype(np.float64)

    r, c = np.nonzero(mask)
    p00 = ids[r, c]
    p10 = np.where(diag_b[r, c + 1], dup[r, c + 1], ids[r, c + 1])
    p11 = np.where(diag_a[r + 1, c + 1], dup[r + 1, c + 1], ids[r + 1, c + 1])
    p01 = ids[r + 1, c]
    faces = np.empty((2 * len(r), 3), dtype=np.int64)
    faces[0::2] = np.column_stack([p00, p10, p11])
    faces[1::2] = np.column_stack([p00, p11, p01])
    return verts, faces


# --------------------------------------------------------------------------
# per-face and per-vertex quantities


class _NormalSampler:
    """Mask-aware bilinear lookup of a normal map at arbitrary screen points."""

    def __init__(self, nm: NormalMap):
        self.nm = nm
        _, idx = ndimage.distance_transform_edt(~nm.mask, return_indices=True)
        self.nearest = idx

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        nm = self.nm
        H, W = nm.shape
        x = pts[:, 0] - 0.5
        y = pts[:, 1] - 0.5
        x0 = np.floor(x).astype(np.int64)
        y0 = np.floor(y).astype(np.int64)
        fx = x - x0
        fy = y - y0
        acc = np.zeros((len(pts), 3))
        wsum = np.zeros(len(pts))
        for dy, dx, w in ((0, 0, (1 - fx) * (1 - fy)), (0, 1, fx * (1 - fy)), (1, 0, (1 - fx) * fy), (1, 1, fx * fy)):
            yy = y0 + dy
            xx = x0 + dx
            ok = (yy >= 0) & (yy < H) & (xx >= 0) & (xx < W)
            ok[ok] &= nm.mask[yy[ok], xx[ok]]
            ww = np.where(ok, w, 0.0)
            acc[ok] += ww[ok, None] * nm.normals[yy[ok], xx[ok]]
            wsum += ww
        norm = np.linalg.norm(acc, axis=1)
        bad = (wsum <= 0) | (norm <= 1e-12)
        if bad.any():
            yy = np.clip(np.floor(pts[bad, 1]).astype(np.int64), 0, H - 1)
            xx = np.clip(np.floor(pts[bad, 0]).astype(np.int64), 0, W - 1)
            ny, nx = self.nearest[0][yy, xx], self.nearest[1][yy, xx]
            acc[bad] = nm.normals[ny, nx]
            norm[bad] = np.linalg.norm(acc[bad], axis=1)
        return acc / norm[:, None]


def face_normals(verts, faces, nm: NormalMap, face_of_pixel, sampler=None) -> np.ndarray:
    """Normalised sum of the normals of each face's pixels.

    Faces that cover no pixel, or whose normals cancel, fall back to a
    bilinear sample of the normal map at the centroid.
    """
    nf = len(faces)
    flat = face_of_pixel.reshape(-1)
    pix = np.flatnonzero(flat >= 0)
    owner = flat[pix]
    n = nm.normals.reshape(-1, 3)[pix]
    acc = np.column_stack([np.bincount(owner, weights=n[:, k], minlength=nf) for k in range(3)])
    norm = np.linalg.norm(acc, axis=1)
    bad = norm <= 1e-12
    out = np.zeros((nf, 3))
    out[~bad] = acc[~bad] / norm[~bad, None]
    if bad.any():
        sampler = sampler or _NormalSampler(nm)
        centroids = verts[faces[bad]].mean(axis=1)
        out[bad] = sampler(centroids)
    return out


def face_first_forms(normals, centroids, cam: CameraModel) -> np.ndarray:
    """``(I11, I12, I22)`` per face from its normal (rays taken at the centroid)."""
    t_u, t_v = tangents(normals, cam, centroids)
    I = first_form_from_tangents(t_u, t_v)
    return np.column_stack([I[:, 0, 0], I[:, 0, 1], I[:, 1, 1]])


def metric_edge_lengths(d, I_a, I_b=None) -> np.ndarray:
    """Edge lengths ``sqrt(1/2 (d'I_a d + d'I_b d))``; boundary edges pass ``I_b=None``."""
    d = np.asarray(d, dtype=np.float64)

    def quad(I):
        return I[:, 0] * d[:, 0] ** 2 + 2.0 * I[:, 1] * d[:, 0] * d[:, 1] + I[:, 2] * d[:, 1] ** 2

    q = quad(I_a)
    if I_b is not None:
        q = 0.5 * (q + quad(I_b))
    return np.sqrt(np.maximum(q, 0.0))


def vertex_sizing(faces, n_vertices, face_of_pixel, cf: CurvatureField, cfg: SizingConfig):
    """``kappa_v`` (max curvature over the star's pixels) and the clamped target length ``L_v``."""
    nf = len(faces)
    flat = face_of_pixel.reshape(-1)
    pix = np.flatnonzero(flat >= 0)
    face_k = np.zeros(nf)
    np.maximum.at(face_k, flat[pix], cf.kappa_max.reshape(-1)[pix])
    kappa = np.zeros(n_vertices)
    for j in range(3):
        np.maximum.at(kappa, faces[:, j], face_k)
    L = optimal_length(kappa, cfg.epsilon, cfg.l_min, cfg.l_max)
    return kappa, L


def face_angles(verts, faces, first_forms=None) -> np.ndarray:
    """Interior angles (degrees), optionally measured in each face's metric."""
    P = verts[faces]
    out = np.empty((len(faces), 3))
    for k in range(3):
        a = P[:, (k + 1) % 3] - P[:, k]
        b = P[:, (k + 2) % 3] - P[:, k]
        if first_forms is None:
            ab = np.sum(a * b, axis=1)
            aa = np.sum(a * a, axis=1)
            bb = np.sum(b * b, axis=1)
        else:
            I = first_forms
            ab = I[:, 0] * a[:, 0] * b[:, 0] + I[:, 1] * (a[:, 0] * b[:, 1] + a[:, 1] * b[:, 0]) + I[:, 2] * a[:, 1] * b[:, 1]
            aa = I[:, 0] * a[:, 0] ** 2 + 2 * I[:, 1] * a[:, 0] * a[:, 1] + I[:, 2] * a[:, 1] ** 2
            bb = I[:, 0] * b[:, 0] ** 2 + 2 * I[:, 1] * b[:, 0] * b[:, 1] + I[:, 2] * b[:, 1] ** 2
        cos = np.clip(ab / np.sqrt(aa * bb), -1.0, 1.0)
        out[:, k] = np.degrees(np.arccos(cos))
    return out


# --------------------------------------------------------------------------
# tangential smoothing


def tangential_smooth(mesh: HalfedgeMesh, iterations: int = 5, max_condition: float = 1e12) -> int:
    """Move interior vertices towards the metric-weighted centroid of their star.

    Each pass solves, per vertex, ``(sum w_f I_f) u = sum w_f I_f c_f`` with
    ``w_f = A_f sqrt(det I_f) / L_f^2`` from the previous iterate (Jacobi
    style). Moves that would invert an incident face are undone. Boundary
    vertices stay put. Returns the number of passes that moved something.
    """
    fl = mesh.live_faces()
    if len(fl) == 0:
        return 0
    faces = mesh.face_array()[fl]
    I = mesh.first_forms(fl)
    detI = np.maximum(I[:, 0] * I[:, 2] - I[:, 1] ** 2, 0.0)
    Lv = np.asarray(mesh.L)
    Lf = Lv[faces].mean(axis=1)
    nv = len(mesh.px)
    face_of_he = np.asarray(mesh.he_face)
    v_he = np.asarray(mesh.v_he)
    movable = ~np.asarray(mesh.v_del, dtype=bool) & (v_he >= 0)
    movable[movable] &= face_of_he[v_he[movable]] >= 0

    P = mesh.vertex_array()
    moved_passes = 0
    for _ in range(iterations):
        A = signed_areas(P, faces)
        c = P[faces].mean(axis=1)
        w = A * np.sqrt(detI) / (Lf * Lf)
        wI = w[:, None] * I
        rhs_u = wI[:, 0] * c[:, 0] + wI[:, 1] * c[:, 1]
        rhs_v = wI[:, 1] * c[:, 0] + wI[:, 2] * c[:, 1]
        M = np.zeros((nv, 3))
        R = np.zeros((nv, 2))
        for j in range(3):
            idx = faces[:, j]
            for k in range(3):
                M[:, k] += np.bincount(idx, weights=wI[:, k], minlength=nv)
            R[:, 0] += np.bincount(idx, weights=rhs_u, minlength=nv)
            R[:, 1] += np.bincount(idx, weights=rhs_v, minlength=nv)
        det = M[:, 0] * M[:, 2] - M[:, 1] ** 2
        tr = M[:, 0] + M[:, 2]
        disc = np.sqrt(np.maximum(0.25 * (M[:, 0] - M[:, 2]) ** 2 + M[:, 1] ** 2, 0.0))
        lam_max = 0.5 * tr + disc
        lam_min = 0.5 * tr - disc
        ok = movable & (det > 0) & (lam_min > 0) & (lam_max <= max_condition * lam_min)
        newP = P.copy()
        with np.errstate(invalid="ignore", divide="ignore"):
            nu = (M[:, 2] * R[:, 0] - M[:, 1] * R[:, 1]) / det
            nv_ = (M[:, 0] * R[:, 1] - M[:, 1] * R[:, 0]) / det
        newP[ok, 0] = nu[ok]
        newP[ok, 1] = nv_[ok]
        moving = ok.copy()
        # undo moves that invert faces until every face is valid again
        while True:
            bad = signed_areas(newP, faces) <= MIN_AREA
            if not bad.any():
                break
            culprits = np.unique(faces[bad])
            culprits = culprits[moving[culprits]]
            if len(culprits) == 0:
                break
            newP[culprits] = P[culprits]
            moving[culprits] = False
        if moving.any():
            moved_passes += 1
        P = newP
    mesh.px = P[:, 0].tolist()
    mesh.py = P[:, 1].tolist()
    return moved_passes


# --------------------------------------------------------------------------
# edit passes


def _edge_metric_length(mesh: HalfedgeMesh, e: int) -> float:
    h = 2 * e
    to = mesh.he_to
    a, b = to[h + 1], to[h]
    dx = mesh.px[a] - mesh.px[b]
    dy = mesh.py[a] - mesh.py[b]
    q = 0.0
    n = 0
    for f in (mesh.he_face[h], mesh.he_face[h + 1]):
        if f >= 0:
            q += mesh.I11[f] * dx * dx + 2.0 * mesh.I12[f] * dx * dy + mesh.I22[f] * dy * dy
            n += 1
    return math.sqrt(max(q / n, 0.0)) if n else 0.0


def _all_edge_lengths(mesh: HalfedgeMesh):
    """Metric lengths and target lengths for every edge slot (deleted ones are NaN)."""
    ne = len(mesh.e_del)
    to = np.asarray(mesh.he_to)
    face = np.asarray(mesh.he_face)
    a = to[1::2]
    b = to[0::2]
    fa = face[0::2]
    fb = face[1::2]
    P = mesh.vertex_array()
    d = P[a] - P[b]
    I = mesh.first_forms()
    Ia = I[np.maximum(fa, 0)]
    Ib = I[np.maximum(fb, 0)]
    Ia = np.where((fa >= 0)[:, None], Ia, Ib)
    Ib = np.where((fb >= 0)[:, None], Ib, Ia)
    lengths = metric_edge_lengths(d, Ia, Ib)
    Lv = np.asarray(mesh.L)
    target = 0.5 * (Lv[a] + Lv[b])
    dead = np.asarray(mesh.e_del, dtype=bool)
    lengths[dead] = np.nan
    return lengths[:ne], target[:ne]


class Silhouette:
    """Arclength parametrisation of the initial mesh's boundary polylines.

    Boundary vertices are looked up by position; a position may occur more
    than once (duplicated corner vertices), in which case the candidate that
    spans the shortest forward arc is used.
    """

    def __init__(self, mesh: HalfedgeMesh, mask=None):
        self.mask = None if mask is None else np.asarray(mask, dtype=bool)
        self.loops = []
        self.index: dict[tuple[float, float], list[tuple[int, float]]] = {}
        for k, loop in enumerate(mesh.boundary_loops()):
            pts = np.array([mesh.position(mesh.he_to[h ^ 1]) for h in loop])
            seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
            s = np.concatenate([[0.0], np.cumsum(seg)])
            self.loops.append((pts, s))
            for p, sp in zip(map(tuple, pts.tolist()), s[:-1].tolist()):
                self.index.setdefault(p, []).append((k, sp))

    def point(self, loop: int, s: float):
        pts, cum = self.loops[loop]
        s = s % cum[-1]
        i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(pts) - 1)
        t = (s - cum[i]) / (cum[i + 1] - cum[i])
        a = pts[i]
        b = pts[(i + 1) % len(pts)]
        return (float(a[0] + t * (b[0] - a[0])), float(a[1] + t * (b[1] - a[1])))

    def _arc(self, pa, pb):
        best = None
        for la, sa in self.index.get(tuple(pa), ()):
            for lb, sb in self.index.get(tuple(pb), ()):
                if la != lb:
                    continue
                arc = (sb - sa) % self.loops[la][1][-1]
                if arc > 0 and (best is None or arc < best[0]):
                    best = (arc, la, sa)
        return best

    def split_point(self, pa, pb):
        """Point halfway along the boundary arc from ``pa`` to ``pb`` (or None)."""
        best = self._arc(pa, pb)
        if best is None:
            return None
        arc, loop, sa = best
        s_mid = (sa + 0.5 * arc) % self.loops[loop][1][-1]
        p = self.point(loop, s_mid)
        return p, loop, s_mid

    def _corners(self, loop: int, sa: float, arc: float):
        """Polyline corners strictly inside the arc ``[sa, sa + arc]``, in arc order."""
        pts, cum = self.loops[loop]
        rel = (cum[:-1] - sa) % cum[-1]
        sel = np.flatnonzero((rel > 0) & (rel < arc))
        return pts[sel[np.argsort(rel[sel], kind="stable")]]

    def _inner(self, pa, pb):
        best = self._arc(pa, pb)
        if best is None:
            return None
        arc, loop, sa = best
        return self._corners(loop, sa, arc)

    def chord_deviation(self, pa, pb) -> float:
        """Largest distance from the boundary arc ``pa -> pb`` to the chord ``pa pb``."""
        inner = self._inner(pa, pb)
        if inner is None:
            return math.inf
        if len(inner) == 0:
            return 0.0
        a = np.asarray(pa)
        d = np.asarray(pb) - a
        dd = float(d @ d)
        t = np.clip((inner - a) @ d / dd, 0.0, 1.0) if dd > 0 else np.zeros(len(inner))
        return float(np.max(np.linalg.norm(inner - a - t[:, None] * d, axis=1)))

    def uncovered(self, pa, pb) -> int:
        """Number of foreground pixel centres the chord ``pa pb`` cuts off the arc ``pa -> pb``.

        Centres strictly inside the polygon bounded by the arc and the chord
        (even-odd rule) count as uncovered.
        """
        if self.mask is None:
            return 0
        inner = self._inner(pa, pb)
        if inner is None:
            return self.mask.size
        return self._uncovered(pa, pb, inner)

    def split_uncovered(self, pa, pb) -> int:
        """Largest :meth:`uncovered` of the two chords created by :meth:`split_point`."""
        if self.mask is None:
            return 0
        best = self._arc(pa, pb)
        if best is None:
            return self.mask.size
        arc, loop, sa = best
        p = self.point(loop, sa + 0.5 * arc)
        return max(
            self._uncovered(pa, p, self._corners(loop, sa, 0.5 * arc)),
            self._uncovered(p, pb, self._corners(loop, (sa + 0.5 * arc) % self.loops[loop][1][-1], 0.5 * arc)),
        )

    def _uncovered(self, pa, pb, inner) -> int:
        if len(inner) == 0:
            return 0
        poly = np.vstack([pa, inner, pb])
        H, W = self.mask.shape
        c0, r0 = np.maximum(np.floor(poly.min(axis=0) - 0.5).astype(int), 0)
        c1, r1 = np.minimum(np.ceil(poly.max(axis=0) + 0.5).astype(int), [W, H])
        rr, cc = np.nonzero(self.mask[r0:r1, c0:c1])
        if len(rr) == 0:
            return 0
        px = cc + c0 + 0.5
        py = rr + r0 + 0.5
        a = np.asarray(pa, dtype=np.float64)
        d = np.asarray(pb, dtype=np.float64) - a
        dd = float(d @ d)
        t = np.clip(((px - a[0]) * d[0] + (py - a[1]) * d[1]) / dd, 0.0, 1.0)
        # centres on the chord stay covered: it becomes an outer edge
        on = np.hypot(px - a[0] - t * d[0], py - a[1] - t * d[1]) < 1e-9
        inside = np.zeros(len(px), dtype=bool)
        q = np.roll(poly, -1, axis=0)
        for (x0, y0), (x1, y1) in zip(poly.tolist(), q.tolist()):
            if y0 == y1:
                continue
            crosses = (py >= min(y0, y1)) & (py < max(y0, y1))
            xi = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            inside ^= crosses & (px < xi)
        return int((inside & ~on).sum())

    def add(self, p, loop: int, s: float) -> None:
        self.index.setdefault(tuple(p), []).append((loop, s))


def split_long_edges(mesh: HalfedgeMesh, cfg: SizingConfig, silhouette: Silhouette | None = None) -> int:
    """Split edges longer than ``split_factor * L_e``, longest first.

    Boundary edges are split on the initial boundary polyline when a
    ``silhouette`` is given, so the domain outline never changes.
    """
    lengths, target = _all_edge_lengths(mesh)
    with np.errstate(invalid="ignore"):
        cand = np.flatnonzero(lengths > cfg.split_factor * target)
    order = cand[np.lexsort((cand, -lengths[cand]))]
    done = 0
    for e in order.tolist():
        point = None
        if silhouette is not None and mesh.is_boundary_edge(e):
            h = 2 * e if mesh.he_face[2 * e] < 0 else 2 * e + 1
            pa = mesh.position(mesh.he_to[h ^ 1])
            pb = mesh.position(mesh.he_to[h])
            hit = silhouette.split_point(pa, pb)
            if hit is None:
                continue
            point, loop, s_mid = hit
            c = mesh.position(mesh.he_to[mesh.he_next[h ^ 1]])
            # the interior face runs b -> a -> c and is cut into (b, p, c) and (p, a, c)
            if signed_area(pb, point, c) <= MIN_AREA or signed_area(point, pa, c) <= MIN_AREA:
                continue
            if silhouette.split_uncovered(pa, pb) > cfg.boundary_max_uncovered:
                continue
            silhouette.add(point, loop, s_mid)
        mesh.edge_split(e, point)
        done += 1
    return done


def _boundary_turn(mesh: HalfedgeMesh, v: int) -> float:
    """Absolute turning angle of the boundary polyline at boundary vertex ``v``."""
    h_out = mesh.v_he[v]
    h_in = mesh.he_prev[h_out]
    a = mesh.he_to[h_in ^ 1]
    b = mesh.he_to[h_out]
    px, py = mesh.px, mesh.py
    d1x, d1y = px[v] - px[a], py[v] - py[a]
    d2x, d2y = px[b] - px[v], py[b] - py[v]
    return abs(math.atan2(d1x * d2y - d1y * d2x, d1x * d2x + d1y * d2y))


def _creates_long_edge(mesh: HalfedgeMesh, h: int, target, L_new: float, limit: float) -> bool:
    """Would collapsing ``h`` at ``target`` create an edge longer than ``limit * L``?"""
    to = mesh.he_to
    face = mesh.he_face
    v0 = to[h ^ 1]
    v1 = to[h]
    tx, ty = target
    moved = (v0,) if (mesh.px[v1], mesh.py[v1]) == (tx, ty) else (v0, v1)
    I11, I12, I22 = mesh.I11, mesh.I12, mesh.I22
    for v in moved:
        for x in mesh.outgoing(v):
            w = to[x]
            if w == v0 or w == v1:
                continue
            dx = mesh.px[w] - tx
            dy = mesh.py[w] - ty
            q = 0.0
            n = 0
            for f in (face[x], face[x ^ 1]):
                if f >= 0:
                    q += I11[f] * dx * dx + 2.0 * I12[f] * dx * dy + I22[f] * dy * dy
                    n += 1
            lim = limit * 0.5 * (L_new + mesh.L[w])
            if q / n > lim * lim:
                return True
    return False


def _boundary_chord_ok(mesh: HalfedgeMesh, v: int, silhouette, tol: float, max_uncovered: int = 1) -> bool:
    """Removing boundary vertex ``v`` keeps the outline within ``tol`` of the original
    and uncovers at most ``max_uncovered`` foreground pixel centres."""
    if silhouette is None:
        return True
    h_out = mesh.v_he[v]
    succ = mesh.he_to[h_out]
    pred = mesh.he_to[mesh.he_prev[h_out] ^ 1]
    if succ == pred:
        return False
    pa, pb = mesh.position(pred), mesh.position(succ)
    return silhouette.chord_deviation(pa, pb) <= tol and silhouette.uncovered(pa, pb) <= max_uncovered


def collapse_short_edges(mesh: HalfedgeMesh, cfg: SizingConfig, silhouette: Silhouette | None = None) -> int:
    lengths, target = _all_edge_lengths(mesh)
    with np.errstate(invalid="ignore"):
        cand = np.flatnonzero(lengths < cfg.collapse_factor * target)
    order = cand[np.lexsort((cand, lengths[cand]))]
    done = 0
    to = mesh.he_to
    for e in order.tolist():
        if mesh.e_del[e]:
            continue
        v0, v1 = to[2 * e + 1], to[2 * e]
        if _edge_metric_length(mesh, e) >= cfg.collapse_factor * 0.5 * (mesh.L[v0] + mesh.L[v1]):
            continue
        b0 = mesh.is_boundary_vertex(v0)
        b1 = mesh.is_boundary_vertex(v1)
        if b0 and b1:
            if not mesh.is_boundary_edge(e):
                continue
            # drop the flatter boundary vertex first
            if _boundary_turn(mesh, v0) <= _boundary_turn(mesh, v1):
                options = [2 * e, 2 * e + 1]
            else:
                options = [2 * e + 1, 2 * e]
            options = [(h, mesh.position(to[h]), mesh.L[to[h]], mesh.kappa[to[h]]) for h in options]
        elif b0 or b1:
            h = 2 * e + 1 if b0 else 2 * e
            options = [(h, mesh.position(to[h]), mesh.L[to[h]], mesh.kappa[to[h]])]
        else:
            mid = (0.5 * (mesh.px[v0] + mesh.px[v1]), 0.5 * (mesh.py[v0] + mesh.py[v1]))
            options = [(2 * e, mid, 0.5 * (mesh.L[v0] + mesh.L[v1]), 0.5 * (mesh.kappa[v0] + mesh.kappa[v1]))]
        for h, tgt, L_new, k_new in options:
            if b0 and b1 and not _boundary_chord_ok(mesh, to[h ^ 1], silhouette, cfg.boundary_tolerance, cfg.boundary_max_uncovered):
                continue
            if _creates_long_edge(mesh, h, tgt, L_new, cfg.split_factor):
                continue
            if not mesh.collapse_topology_ok(h) or not mesh.collapse_geometry_ok(h, tgt):
                continue
            kept = mesh.collapse(h, tgt)
            mesh.L[kept] = L_new
            mesh.kappa[kept] = k_new
            done += 1
            break
    return done


def _metric_angle(mesh: HalfedgeMesh, f: int, o: int, a: int, b: int) -> float:
    """Angle (degrees) at ``o`` between ``a`` and ``b``, measured in face ``f``'s metric."""
    ux, uy = mesh.px[a] - mesh.px[o], mesh.py[a] - mesh.py[o]
    vx, vy = mesh.px[b] - mesh.px[o], mesh.py[b] - mesh.py[o]
    g11, g12, g22 = mesh.I11[f], mesh.I12[f], mesh.I22[f]
    uv = g11 * ux * vx + g12 * (ux * vy + uy * vx) + g22 * uy * vy
    uu = g11 * ux * ux + 2.0 * g12 * ux * uy + g22 * uy * uy
    vv = g11 * vx * vx + 2.0 * g12 * vx * vy + g22 * vy * vy
    if uu <= 0.0 or vv <= 0.0:
        return 180.0
    return math.degrees(math.acos(max(-1.0, min(1.0, uv / math.sqrt(uu * vv)))))


def remove_boundary_slivers(mesh: HalfedgeMesh, max_angle: float = 120.0) -> int:
    """Collapse interior vertices that sit almost on a boundary edge.

    Boundary edges cannot be flipped, so a face whose interior apex sees the
    boundary edge at more than ``max_angle`` (in the face metric) is removed by
    collapsing the apex into the nearer boundary endpoint.
    """
    to, nxt, face = mesh.he_to, mesh.he_next, mesh.he_face
    done = 0
    for e in mesh.live_edges():
        if mesh.e_del[e] or not mesh.is_boundary_edge(e):
            continue
        t = 2 * e if face[2 * e] >= 0 else 2 * e + 1
        f = face[t]
        x, y = to[t ^ 1], to[t]
        c = to[nxt[t]]
        if mesh.is_boundary_vertex(c) or _metric_angle(mesh, f, c, x, y) <= max_angle:
            continue
        h_cx = nxt[nxt[t]]
        h_cy = nxt[t] ^ 1
        options = sorted((h_cx, h_cy), key=lambda h: (_edge_metric_length(mesh, h >> 1), h))
        for h in options:
            tgt = mesh.position(to[h])
            if mesh.collapse_topology_ok(h) and mesh.collapse_geometry_ok(h, tgt):
                mesh.collapse(h, tgt)
                done += 1
                break
    return done


def _needs_flip(mesh: HalfedgeMesh, e: int, metric: bool = False, tol: float = 1e-10) -> bool:
    """Opposite angles sum to more than pi.

    Angles are measured in plain screen coordinates, or with ``metric=True`` in
    the mean first fundamental form of the two faces.
    """
    h = 2 * e
    to = mesh.he_to
    nxt = mesh.he_next
    a = to[h + 1]
    b = to[h]
    c = to[nxt[h]]
    d = to[nxt[h + 1]]
    px, py = mesh.px, mesh.py
    if metric:
        fa, fb = mesh.he_face[h], mesh.he_face[h + 1]
        g11 = 0.5 * (mesh.I11[fa] + mesh.I11[fb])
        g12 = 0.5 * (mesh.I12[fa] + mesh.I12[fb])
        g22 = 0.5 * (mesh.I22[fa] + mesh.I22[fb])
        # angle sums are invariant under the linear map, so a Cholesky factor suffices
        l11 = math.sqrt(g11)
        l21 = g12 / l11
        l22 = math.sqrt(max(g22 - l21 * l21, 0.0))
    total = 0.0
    for o in (c, d):
        ux, uy = px[a] - px[o], py[a] - py[o]
        vx, vy = px[b] - px[o], py[b] - py[o]
        if metric:
            ux, uy = l11 * ux + l21 * uy, l22 * uy
            vx, vy = l11 * vx + l21 * vy, l22 * vy
        cr = abs(ux * vy - uy * vx)
        if cr <= 0.0:
            return False
        total += (ux * vx + uy * vy) / cr
    return total < -tol


def delaunay_flips(mesh: HalfedgeMesh, max_flips: int | None = None, metric: bool = False) -> int:
    """Sweep interior edges in id order, flipping non-Delaunay ones until none remain."""
    face = mesh.he_face
    if max_flips is None:
        max_flips = 10 * mesh.n_edges
    flips = 0
    changed = True
    while changed and flips < max_flips:
        changed = False
        for e in range(len(mesh.e_del)):
            if mesh.e_del[e] or face[2 * e] < 0 or face[2 * e + 1] < 0:
                continue
            if _needs_flip(mesh, e, metric) and mesh.edge_flip(e):
                flips += 1
                changed = True
                if flips >= max_flips:
                    break
    return flips


# --------------------------------------------------------------------------
# driver


class _Context:
    """Data fixed over the whole refinement: normals, curvature, sampler."""

    def __init__(self, nm: NormalMap, cam: CameraModel, cf: CurvatureField, cfg: SizingConfig):
        self.nm = nm
        self.cam = cam
        self.cf = cf
        self.cfg = cfg
        self.sampler = _NormalSampler(nm)

    def update(self, mesh: HalfedgeMesh):
        """Re-rasterise and refresh face normals, metrics and vertex sizing in place."""
        verts, faces = mesh.arrays()
        face_of = rasterize(verts, faces, self.nm.mask)
        normals = face_normals(verts, faces, self.nm, face_of, self.sampler)
        centroids = verts[faces].mean(axis=1)
        I = face_first_forms(normals, centroids, self.cam)
        kappa, L = vertex_sizing(faces, len(verts), face_of, self.cf, self.cfg)
        mesh.I11, mesh.I12, mesh.I22 = I[:, 0].tolist(), I[:, 1].tolist(), I[:, 2].tolist()
        mesh.L = L.tolist()
        mesh.kappa = kappa.tolist()
        return verts, faces, face_of, normals, I


def snapshot(mesh: HalfedgeMesh, verts, faces, face_of, normals, I) -> ScreenMesh:
    v_he = np.asarray(mesh.v_he)
    boundary = np.asarray(mesh.he_face)[v_he] < 0
    return ScreenMesh(
        verts=verts,
        faces=faces,
        face_normals=normals,
        first_forms=I,
        L=np.asarray(mesh.L),
        kappa=np.asarray(mesh.kappa),
        boundary=boundary,
        face_of_pixel=face_of,
        halfedge=mesh,
    )


def refine(
    nm: NormalMap,
    cam: CameraModel | None = None,
    cfg: SizingConfig | None = None,
    curvature: CurvatureField | None = None,
    validate: bool = False,
    callback=None,
) -> ScreenMesh:
    """Run the adaptive remeshing loop on the foreground of ``nm``.

    Curvature is computed once from the (blurred, if ``cfg.blur_sigma`` is
    set) normal map; face normals always come from ``nm`` itself. With
    ``validate=True`` the halfedge invariants are checked after every outer
    iteration. ``callback(iteration, mesh)`` is invoked with the compacted
    :class:`ScreenMesh` after each iteration.
    """
    cam = cam or CameraModel()
    cfg = cfg or SizingConfig()
    if curvature is None:
        src = gaussian_blur_normals(nm, cfg.blur_sigma) if cfg.blur_sigma else nm
        curvature = curvature_field(src, cam)
    ctx = _Context(nm, cam, curvature, cfg)

    verts, faces = initial_triangulation(nm.mask)
    mesh = HalfedgeMesh.from_faces(verts, faces)
    silhouette = Silhouette(mesh, nm.mask)
    state = ctx.update(mesh)
    history = []
    for it in range(cfg.outer_iterations):
        n_split = split_long_edges(mesh, cfg, silhouette)
        n_collapse = collapse_short_edges(mesh, cfg, silhouette)
        n_flip = delaunay_flips(mesh, metric=cfg.flip_metric == "first_form")
        tangential_smooth(mesh, cfg.smoothing_iterations)
        mesh = mesh.compact()
        state = ctx.update(mesh)
        # needs the metric of the smoothed faces
        n_sliver = remove_boundary_slivers(mesh)
        if n_sliver:
            mesh = mesh.compact()
            state = ctx.update(mesh)
        if validate:
            mesh.validate()
        history.append(
            {"iteration": it, "split": n_split, "collapse": n_collapse, "flip": n_flip, "sliver": n_sliver, "vertices": mesh.n_vertices, "faces": mesh.n_faces}
        )
        logger.debug("refine iteration %d: %s", it, history[-1])
        if callback is not None:
            callback(it, snapshot(mesh, *state))
    out = snapshot(mesh, *state)
    out.history = history
    return out


def pixel_grid_mesh(nm: NormalMap, cam: CameraModel | None = None) -> ScreenMesh:
    """The unrefined two-triangles-per-pixel mesh with cached face data.

    Both triangles of a pixel take that pixel's normal (its centre lies on
    the shared diagonal, so rasterisation alone would starve one of them).
    """
    cam = cam or CameraModel()
    verts, faces = initial_triangulation(nm.mask)
    mesh = HalfedgeMesh.from_faces(verts, faces)
    face_of = rasterize(verts, faces, nm.mask)
    normals = np.repeat(nm.normals[nm.mask], 2, axis=0)
    I = face_first_forms(normals, verts[faces].mean(axis=1), cam)
    mesh.I11, mesh.I12, mesh.I22 = I[:, 0].tolist(), I[:, 1].tolist(), I[:, 2].tolist()
    return snapshot(mesh, verts, faces, face_of, normals, I)

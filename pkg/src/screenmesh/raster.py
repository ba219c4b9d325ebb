"""Deterministic CPU rasterisation of screen meshes at pixel centres."""

from __future__ import annotations

import numpy as np

_CHUNK = 4_000_000


def _owned(du, dv):
    # tie rule for centres exactly on an edge: exactly one of d and -d owns it
    return (dv < 0) | ((dv == 0) & (du > 0))


def rasterize(verts, faces, mask, with_barycentrics: bool = False):
    """Assign every covered foreground pixel to exactly one face.

    A pixel belongs to a face iff its centre ``(c + 0.5, r + 0.5)`` lies inside
    the face; centres on a shared edge go to the side that owns the edge
    direction, so neighbouring faces never both claim a pixel. Centres on an
    unshared (outer boundary) edge belong to its only face.

    Returns an ``(H, W)`` int array of face ids (``-1`` where uncovered or
    background) and, optionally, an ``(H, W, 3)`` array of barycentric
    coordinates with respect to the face's vertices.
    """
    verts = np.asarray(verts, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    H, W = mask.shape
    face_of = np.full((H, W), -1, dtype=np.int64)
    bary = np.zeros((H, W, 3)) if with_barycentrics else None
    if len(faces) == 0:
        return (face_of, bary) if with_barycentrics else face_of

    P = verts[faces]  # (F, 3, 2)
    umin = P[:, :, 0].min(axis=1)
    umax = P[:, :, 0].max(axis=1)
    vmin = P[:, :, 1].min(axis=1)
    vmax = P[:, :, 1].max(axis=1)
    c0 = np.clip(np.ceil(umin - 0.5), 0, W).astype(np.int64)
    c1 = np.clip(np.floor(umax - 0.5), -1, W - 1).astype(np.int64)
    r0 = np.clip(np.ceil(vmin - 0.5), 0, H).astype(np.int64)
    r1 = np.clip(np.floor(vmax - 0.5), -1, H - 1).astype(np.int64)
    ncol = np.maximum(c1 - c0 + 1, 0)
    nrow = np.maximum(r1 - r0 + 1, 0)
    counts = ncol * nrow

    # canonical edge orientation (lower vertex id first) keeps the edge
    # function bitwise antisymmetric between the two faces sharing an edge
    ia = faces
    ib = faces[:, [1, 2, 0]]
    lo = np.minimum(ia, ib)
    hi = np.maximum(ia, ib)
    sign = np.where(ia == lo, 1.0, -1.0)
    lo_p = verts[lo]
    d_can = verts[hi] - lo_p
    d_dir = verts[ib] - verts[ia]
    own = _owned(d_dir[..., 0], d_dir[..., 1])
    key = (lo * len(verts) + hi).reshape(-1)
    _, inv, cnt = np.unique(key, return_inverse=True, return_counts=True)
    own |= (cnt[inv] == 1).reshape(own.shape)

    claim_face = []
    claim_pix = []
    claim_bary = []
    start = 0
    nf = len(faces)
    while start < nf:
        csum = np.cumsum(counts[start:])
        stop = start + max(int(np.searchsorted(csum, _CHUNK, side="right")), 1)
        stop = min(stop, nf)
        sel = np.arange(start, stop)
        cnt = counts[sel]
        total = int(cnt.sum())
        start = stop
        if total == 0:
            continue
        fidx = np.repeat(sel, cnt)
        offs = np.cumsum(cnt) - cnt
        k = np.arange(total) - np.repeat(offs, cnt)
        nc = ncol[fidx]
        col = c0[fidx] + k % nc
        row = r0[fidx] + k // nc
        keep = mask[row, col]
        fidx, col, row = fidx[keep], col[keep], row[keep]
        pu = col + 0.5
        pv = row + 0.5
        inside = np.ones(len(fidx), dtype=bool)
        E = np.empty((len(fidx), 3))
        for j in range(3):
            lp = lo_p[fidx, j]
            dc = d_can[fidx, j]
            e = sign[fidx, j] * (dc[:, 0] * (pv - lp[:, 1]) - dc[:, 1] * (pu - lp[:, 0]))
            E[:, j] = e
            inside &= (e > 0) | ((e == 0) & own[fidx, j])
        fidx, row, col, E = fidx[inside], row[inside], col[inside], E[inside]
        claim_face.append(fidx)
        claim_pix.append(row * W + col)
        if with_barycentrics:
            # E[:, j] is twice the area opposite vertex (j + 2) % 3
            tot = E.sum(axis=1, keepdims=True)
            claim_bary.append(E[:, [1, 2, 0]] / tot)

    if not claim_face:
        return (face_of, bary) if with_barycentrics else face_of
    fidx = np.concatenate(claim_face)
    pix = np.concatenate(claim_pix)
    # lowest face id wins if a vertex sits exactly on a pixel centre
    order = np.lexsort((fidx, pix))
    pix, fidx = pix[order], fidx[order]
    first = np.ones(len(pix), dtype=bool)
    first[1:] = pix[1:] != pix[:-1]
    face_of.reshape(-1)[pix[first]] = fidx[first]
    if with_barycentrics:
        b = np.concatenate(claim_bary)[order][first]
        bary.reshape(-1, 3)[pix[first]] = b
        return face_of, bary
    return face_of


def pixel_lists(face_of: np.ndarray, n_faces: int) -> list[np.ndarray]:
    """Per-face arrays of flat pixel indices (row-major), in increasing order."""
    flat = face_of.reshape(-1)
    pix = np.flatnonzero(flat >= 0)
    owner = flat[pix]
    order = np.argsort(owner, kind="stable")
    bounds = np.searchsorted(owner[order], np.arange(n_faces + 1))
    pix = pix[order]
    return [pix[bounds[i] : bounds[i + 1]] for i in range(n_faces)]


def point_in_triangle(p, a, b, c) -> bool:
    """Closed point-in-triangle test (orientation independent); test oracle helper."""

    def cross(o, x, y):
        return (x[0] - o[0]) * (y[1] - o[1]) - (x[1] - o[1]) * (y[0] - o[0])

    d1, d2, d3 = cross(a, b, p), cross(b, c, p), cross(c, a, p)
    neg = d1 < 0 or d2 < 0 or d3 < 0
    pos = d1 > 0 or d2 > 0 or d3 > 0
    return not (neg and pos)

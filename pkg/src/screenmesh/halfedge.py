"""Halfedge connectivity for 2D screen-space triangle meshes.

Edges own two consecutive halfedges, so ``twin(h) == h ^ 1`` and
``edge(h) == h >> 1``. Boundary halfedges are stored explicitly with face
``-1`` and are linked into boundary loops, as in OpenMesh/PMP. Every vertex
keeps an outgoing halfedge; for boundary vertices it is the boundary one.

Connectivity lives in plain Python lists because the local edit operations
are scalar by nature; :meth:`HalfedgeMesh.arrays` exports numpy views for
the vectorised geometry code. Deleted elements are tombstoned until
:meth:`HalfedgeMesh.compact` is called.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

#: Faces with a signed screen area at or below this value (px^2) are degenerate.
MIN_AREA = 1e-9


class MeshError(RuntimeError):
    """Raised for invalid input connectivity or a failed validation."""


def signed_area(p0, p1, p2) -> float:
    return 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]))


def signed_areas(verts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p0, p1, p2 = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    d1 = p1 - p0
    d2 = p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


class HalfedgeMesh:
    """Manifold, positively oriented triangle mesh over screen coordinates.

    Per-vertex sizing data (``L``, ``kappa``) and the per-face first
    fundamental form (``I11``, ``I12``, ``I22``) are carried along by the edit
    operations so that metric edge lengths stay available between full
    recomputations.
    """

    def __init__(self):
        self.px: list[float] = []
        self.py: list[float] = []
        self.v_he: list[int] = []
        self.v_del: list[bool] = []
        self.L: list[float] = []
        self.kappa: list[float] = []

        self.he_to: list[int] = []
        self.he_next: list[int] = []
        self.he_prev: list[int] = []
        self.he_face: list[int] = []
        self.e_del: list[bool] = []

        self.f_he: list[int] = []
        self.f_del: list[bool] = []
        self.I11: list[float] = []
        self.I12: list[float] = []
        self.I22: list[float] = []

        self.n_deleted_vertices = 0
        self.n_deleted_faces = 0
        self.n_deleted_edges = 0

    # ------------------------------------------------------------------
    # construction

    @classmethod
    def from_faces(cls, verts, faces, L=None, kappa=None, first_forms=None) -> "HalfedgeMesh":
        """Build from a vertex array ``(V, 2)`` and CCW face array ``(F, 3)``.

        Raises :class:`MeshError` for non-manifold or inconsistently oriented
        input. Vertices not referenced by any face are kept as isolated
        vertices.
        """
        verts = np.asarray(verts, dtype=np.float64)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        nv = len(verts)
        nf = len(faces)
        mesh = cls()
        mesh.px = verts[:, 0].tolist()
        mesh.py = verts[:, 1].tolist()
        mesh.v_del = [False] * nv
        mesh.L = np.zeros(nv).tolist() if L is None else np.asarray(L, dtype=np.float64).tolist()
        mesh.kappa = np.zeros(nv).tolist() if kappa is None else np.asarray(kappa, dtype=np.float64).tolist()
        if first_forms is None:
            I = np.zeros((nf, 3))
            I[:, 0] = I[:, 2] = 1.0
        else:
            I = np.asarray(first_forms, dtype=np.float64).reshape(nf, 3)
        mesh.I11, mesh.I12, mesh.I22 = I[:, 0].tolist(), I[:, 1].tolist(), I[:, 2].tolist()
        mesh.f_del = [False] * nf

        if nf == 0:
            mesh.v_he = [-1] * nv
            return mesh
        if faces.min() < 0 or faces.max() >= nv:
            raise MeshError("face index out of range")
        if np.any(faces[:, 0] == faces[:, 1]) or np.any(faces[:, 1] == faces[:, 2]) or np.any(faces[:, 0] == faces[:, 2]):
            raise MeshError("face with repeated vertex")

        a = faces.reshape(-1)
        b = faces[:, [1, 2, 0]].reshape(-1)
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        keys, edge_of_corner = np.unique(lo * nv + hi, return_inverse=True)
        ne = len(keys)
        corner_he = 2 * edge_of_corner + (a > b)
        if len(np.unique(corner_he)) != len(corner_he):
            raise MeshError("non-manifold edge or inconsistent face orientation")

        nh = 2 * ne
        e_lo = keys // nv
        e_hi = keys % nv
        he_to = np.empty(nh, dtype=np.int64)
        he_to[0::2] = e_hi
        he_to[1::2] = e_lo
        he_face = np.full(nh, -1, dtype=np.int64)
        he_face[corner_he] = np.repeat(np.arange(nf), 3)
        he_next = np.full(nh, -1, dtype=np.int64)
        corner_next = corner_he.reshape(nf, 3)[:, [1, 2, 0]].reshape(-1)
        he_next[corner_he] = corner_next

        he_from = he_to[np.arange(nh) ^ 1]
        boundary = np.flatnonzero(he_face < 0)
        if len(boundary):
            out_b = np.full(nv, -1, dtype=np.int64)
            starts = he_from[boundary]
            if len(np.unique(starts)) != len(starts):
                raise MeshError("non-manifold vertex (multiple boundary fans)")
            out_b[starts] = boundary
            nxt = out_b[he_to[boundary]]
            if np.any(nxt < 0):
                raise MeshError("broken boundary loop")
            he_next[boundary] = nxt
        he_prev = np.empty(nh, dtype=np.int64)
        he_prev[he_next] = np.arange(nh)

        v_he = np.full(nv, -1, dtype=np.int64)
        # any outgoing halfedge first, then prefer boundary ones
        order = np.arange(nh)[::-1]
        v_he[he_from[order]] = order
        if len(boundary):
            v_he[he_from[boundary]] = boundary

        mesh.he_to = he_to.tolist()
        mesh.he_next = he_next.tolist()
        mesh.he_prev = he_prev.tolist()
        mesh.he_face = he_face.tolist()
        mesh.e_del = [False] * ne
        f_he = np.empty(nf, dtype=np.int64)
        f_he[:] = corner_he.reshape(nf, 3)[:, 0]
        mesh.f_he = f_he.tolist()
        mesh.v_he = v_he.tolist()

        # each vertex must be a single (half-)fan
        deg_total = np.bincount(he_from, minlength=nv)
        if np.any(mesh._fan_sizes() != deg_total):
            raise MeshError("non-manifold vertex (star is not a single fan)")
        return mesh

    def _fan_sizes(self) -> np.ndarray:
        """Length of the rotation orbit of each vertex's outgoing halfedge."""
        nxt = np.asarray(self.he_next)
        prev = np.asarray(self.he_prev)
        start = np.asarray(self.v_he)
        live = start >= 0
        sizes = np.zeros(len(start), dtype=np.int64)
        if not live.any():
            return sizes
        rot = prev ^ 1  # rot[h] = twin(prev(h))
        cur = rot[start[live]]
        count = np.ones(live.sum(), dtype=np.int64)
        active = cur != start[live]
        for _ in range(len(nxt)):
            if not active.any():
                break
            count[active] += 1
            cur[active] = rot[cur[active]]
            active &= cur != start[live]
        sizes[live] = count
        return sizes

    # ------------------------------------------------------------------
    # sizes and basic queries

    @property
    def n_vertices(self) -> int:
        return len(self.px) - self.n_deleted_vertices

    @property
    def n_faces(self) -> int:
        return len(self.f_he) - self.n_deleted_faces

    @property
    def n_edges(self) -> int:
        return len(self.e_del) - self.n_deleted_edges

    def twin(self, h: int) -> int:
        return h ^ 1

    def from_vertex(self, h: int) -> int:
        return self.he_to[h ^ 1]

    def to_vertex(self, h: int) -> int:
        return self.he_to[h]

    def is_boundary_halfedge(self, h: int) -> bool:
        return self.he_face[h] < 0

    def is_boundary_edge(self, e: int) -> bool:
        return self.he_face[2 * e] < 0 or self.he_face[2 * e + 1] < 0

    def is_boundary_vertex(self, v: int) -> bool:
        h = self.v_he[v]
        return h < 0 or self.he_face[h] < 0

    def position(self, v: int) -> tuple[float, float]:
        return (self.px[v], self.py[v])

    def outgoing(self, v: int) -> list[int]:
        """Outgoing halfedges of ``v`` in counter-clockwise order."""
        h0 = self.v_he[v]
        if h0 < 0:
            return []
        prev = self.he_prev
        out = [h0]
        h = prev[h0] ^ 1
        while h != h0:
            out.append(h)
            h = prev[h] ^ 1
        return out

    def one_ring(self, v: int) -> tuple[list[int], list[int]]:
        """Counter-clockwise neighbours of ``v`` and the faces of its star."""
        hs = self.outgoing(v)
        to = self.he_to
        face = self.he_face
        return [to[h] for h in hs], [face[h] for h in hs if face[h] >= 0]

    def face_vertices(self, f: int) -> tuple[int, int, int]:
        h = self.f_he[f]
        nxt = self.he_next
        to = self.he_to
        h1 = nxt[h]
        return to[h], to[h1], to[nxt[h1]]

    def find_halfedge(self, a: int, b: int) -> int:
        """Halfedge from ``a`` to ``b`` or ``-1``."""
        for h in self.outgoing(a):
            if self.he_to[h] == b:
                return h
        return -1

    def edge_vertices(self, e: int) -> tuple[int, int]:
        return self.he_to[2 * e + 1], self.he_to[2 * e]

    def live_edges(self) -> list[int]:
        return [e for e, dead in enumerate(self.e_del) if not dead]

    def face_area(self, f: int) -> float:
        a, b, c = self.face_vertices(f)
        px, py = self.px, self.py
        return 0.5 * ((px[b] - px[a]) * (py[c] - py[a]) - (py[b] - py[a]) * (px[c] - px[a]))

    # ------------------------------------------------------------------
    # element allocation

    def _new_vertex(self, x: float, y: float, L: float = 0.0, kappa: float = 0.0) -> int:
        self.px.append(x)
        self.py.append(y)
        self.v_he.append(-1)
        self.v_del.append(False)
        self.L.append(L)
        self.kappa.append(kappa)
        return len(self.px) - 1

    def _new_edge(self, start: int, end: int) -> int:
        """Append an edge; returns the halfedge pointing to ``end``."""
        h = len(self.he_to)
        self.he_to.extend((end, start))
        self.he_next.extend((-1, -1))
        self.he_prev.extend((-1, -1))
        self.he_face.extend((-1, -1))
        self.e_del.append(False)
        return h

    def _new_face(self, I11: float, I12: float, I22: float) -> int:
        self.f_he.append(-1)
        self.f_del.append(False)
        self.I11.append(I11)
        self.I12.append(I12)
        self.I22.append(I22)
        return len(self.f_he) - 1

    def _link(self, h: int, n: int) -> None:
        self.he_next[h] = n
        self.he_prev[n] = h

    def _adjust_outgoing(self, v: int) -> None:
        face = self.he_face
        for h in self.outgoing(v):
            if face[h] < 0:
                self.v_he[v] = h
                return

    # ------------------------------------------------------------------
    # split

    def edge_split(self, e: int, point=None) -> int:
        """Insert a vertex on edge ``e`` (midpoint by default); returns its id.

        The two incident triangles become four (one becomes two on the
        boundary). New faces inherit the first fundamental form of the face
        they were cut from; the new vertex gets the mean sizing data of the
        edge endpoints.
        """
        h0 = 2 * e
        o0 = h0 + 1
        to = self.he_to
        face = self.he_face
        nxt = self.he_next
        va = to[o0]
        vb = to[h0]
        if point is None:
            point = (0.5 * (self.px[va] + self.px[vb]), 0.5 * (self.py[va] + self.py[vb]))
        v = self._new_vertex(
            float(point[0]),
            float(point[1]),
            0.5 * (self.L[va] + self.L[vb]),
            0.5 * (self.kappa[va] + self.kappa[vb]),
        )
        # h0: va -> vb becomes v -> vb ; o0: vb -> va becomes vb -> v
        e1 = self._new_edge(v, va)
        t1 = e1 + 1
        f0 = face[h0]
        f3 = face[o0]
        self.v_he[v] = h0
        to[o0] = v

        if f0 >= 0:
            h1 = nxt[h0]
            h2 = nxt[h1]
            v1 = to[h1]
            e0 = self._new_edge(v, v1)
            t0 = e0 + 1
            f1 = self._new_face(self.I11[f0], self.I12[f0], self.I22[f0])
            self.f_he[f0] = h0
            self.f_he[f1] = h2
            face[h1] = f0
            face[t0] = f0
            face[h0] = f0
            face[h2] = f1
            face[t1] = f1
            face[e0] = f1
            self._link(h0, h1)
            self._link(h1, t0)
            self._link(t0, h0)
            self._link(e0, h2)
            self._link(h2, t1)
            self._link(t1, e0)
        else:
            self._link(self.he_prev[h0], t1)
            self._link(t1, h0)

        if f3 >= 0:
            o1 = nxt[o0]
            o2 = nxt[o1]
            v3 = to[o1]
            e2 = self._new_edge(v, v3)
            t2 = e2 + 1
            f2 = self._new_face(self.I11[f3], self.I12[f3], self.I22[f3])
            self.f_he[f2] = o1
            self.f_he[f3] = o0
            face[o1] = f2
            face[t2] = f2
            face[e1] = f2
            face[o2] = f3
            face[o0] = f3
            face[e2] = f3
            self._link(e1, o1)
            self._link(o1, t2)
            self._link(t2, e1)
            self._link(o0, e2)
            self._link(e2, o2)
            self._link(o2, o0)
        else:
            self._link(e1, nxt[o0])
            self._link(o0, e1)
            self.v_he[v] = e1

        if self.v_he[va] == h0:
            self.v_he[va] = t1
        return v

    # ------------------------------------------------------------------
    # collapse

    def collapse_topology_ok(self, h: int) -> bool:
        """Link condition and boundary rules for collapsing ``from(h)`` into ``to(h)``."""
        o = h ^ 1
        to = self.he_to
        face = self.he_face
        nxt = self.he_next
        v0 = to[o]
        v1 = to[h]
        if self.e_del[h >> 1]:
            return False

        vl = vr = -1
        if face[h] >= 0:
            h1 = nxt[h]
            h2 = nxt[h1]
            vl = to[h1]
            if face[h1 ^ 1] < 0 and face[h2 ^ 1] < 0:
                return False
        if face[o] >= 0:
            o1 = nxt[o]
            o2 = nxt[o1]
            vr = to[o1]
            if face[o1 ^ 1] < 0 and face[o2 ^ 1] < 0:
                return False
        if vl == vr:
            return False
        if (
            self.is_boundary_vertex(v0)
            and self.is_boundary_vertex(v1)
            and face[h] >= 0
            and face[o] >= 0
        ):
            return False

        ring0 = {to[x] for x in self.outgoing(v0)}
        for x in self.outgoing(v1):
            w = to[x]
            if w in ring0 and w != vl and w != vr:
                return False
        return True

    def collapse_geometry_ok(self, h: int, target) -> bool:
        """True if no surviving face of either endpoint degenerates or flips at ``target``."""
        o = h ^ 1
        to = self.he_to
        face = self.he_face
        nxt = self.he_next
        px, py = self.px, self.py
        v0 = to[o]
        v1 = to[h]
        skip = (face[h], face[o])
        tx, ty = float(target[0]), float(target[1])
        for v in (v0, v1):
            for x in self.outgoing(v):
                f = face[x]
                if f < 0 or f == skip[0] or f == skip[1]:
                    continue
                # x: v -> b, next: b -> c, face (v, b, c)
                b = to[x]
                c = to[nxt[x]]
                bx = tx if b in (v0, v1) else px[b]
                by = ty if b in (v0, v1) else py[b]
                cx = tx if c in (v0, v1) else px[c]
                cy = ty if c in (v0, v1) else py[c]
                area = 0.5 * ((bx - tx) * (cy - ty) - (by - ty) * (cx - tx))
                if area <= MIN_AREA:
                    return False
        return True

    def collapse(self, h: int, target=None) -> int:
        """Collapse ``from(h)`` into ``to(h)`` without legality checks; returns the kept vertex."""
        to = self.he_to
        nxt = self.he_next
        prev = self.he_prev
        face = self.he_face
        h0 = h
        h1 = prev[h0]
        o0 = h0 ^ 1
        o1 = nxt[o0]

        hn = nxt[h0]
        hp = prev[h0]
        on = nxt[o0]
        op = prev[o0]
        fh = face[h0]
        fo = face[o0]
        vh = to[h0]
        vo = to[o0]

        for x in self.outgoing(vo):
            to[x ^ 1] = vh
        self._link(hp, hn)
        self._link(op, on)
        if fh >= 0:
            self.f_he[fh] = hn
        if fo >= 0:
            self.f_he[fo] = on
        if self.v_he[vh] == o0:
            self.v_he[vh] = hn
        self._adjust_outgoing(vh)
        self.v_he[vo] = -1
        self.v_del[vo] = True
        self.n_deleted_vertices += 1
        self.e_del[h0 >> 1] = True
        self.n_deleted_edges += 1

        if nxt[nxt[h1]] == h1:
            self._remove_loop(h1)
        if nxt[nxt[o1]] == o1:
            self._remove_loop(o1)

        if target is not None:
            self.px[vh] = float(target[0])
            self.py[vh] = float(target[1])
        return vh

    def _remove_loop(self, h: int) -> None:
        to = self.he_to
        nxt = self.he_next
        face = self.he_face
        h0 = h
        h1 = nxt[h0]
        o0 = h0 ^ 1
        o1 = h1 ^ 1
        v0 = to[h0]
        v1 = to[h1]
        fh = face[h0]
        fo = face[o0]

        self._link(h1, nxt[o0])
        self._link(self.he_prev[o0], h1)
        face[h1] = fo
        self.v_he[v0] = h1
        self._adjust_outgoing(v0)
        self.v_he[v1] = o1
        self._adjust_outgoing(v1)
        if fo >= 0 and self.f_he[fo] == o0:
            self.f_he[fo] = h1
        if fh >= 0:
            self.f_del[fh] = True
            self.n_deleted_faces += 1
        self.e_del[h0 >> 1] = True
        self.n_deleted_edges += 1

    def edge_collapse(self, e: int, target=None) -> bool:
        """Collapse edge ``e`` if legal; returns False (mesh untouched) otherwise.

        Interior pairs merge at ``target`` (midpoint by default). A boundary and
        an interior vertex merge at the boundary vertex. Two boundary vertices
        may only merge along a boundary edge, at one of the two endpoints
        (``target`` selects which; default keeps the second endpoint).
        """
        h = 2 * e
        v0, v1 = self.he_to[h ^ 1], self.he_to[h]
        b0 = self.is_boundary_vertex(v0)
        b1 = self.is_boundary_vertex(v1)
        if b0 and b1:
            if not self.is_boundary_edge(e):
                return False
            if target is not None and tuple(target) == self.position(v0):
                h ^= 1
            target = self.position(self.he_to[h])
        elif b0:
            h ^= 1
            target = self.position(v0)
        elif b1:
            target = self.position(v1)
        elif target is None:
            target = (0.5 * (self.px[v0] + self.px[v1]), 0.5 * (self.py[v0] + self.py[v1]))
        if not self.collapse_topology_ok(h) or not self.collapse_geometry_ok(h, target):
            return False
        self.collapse(h, target)
        return True

    # ------------------------------------------------------------------
    # flip

    def flip_ok(self, e: int) -> bool:
        a0 = 2 * e
        b0 = a0 + 1
        face = self.he_face
        if self.e_del[e] or face[a0] < 0 or face[b0] < 0:
            return False
        to = self.he_to
        nxt = self.he_next
        a = to[b0]
        b = to[a0]
        c = to[nxt[a0]]
        d = to[nxt[b0]]
        if c == d:
            return False
        px, py = self.px, self.py
        if signed_area((px[c], py[c]), (px[a], py[a]), (px[d], py[d])) <= MIN_AREA:
            return False
        if signed_area((px[d], py[d]), (px[b], py[b]), (px[c], py[c])) <= MIN_AREA:
            return False
        return self.find_halfedge(c, d) < 0

    def edge_flip(self, e: int) -> bool:
        """Swap the diagonal of the quad around interior edge ``e``.

        Returns False without touching the mesh for boundary edges, non-convex
        quads, or when the new diagonal already exists. Both new faces get the
        mean first fundamental form of the two old faces.
        """
        if not self.flip_ok(e):
            return False
        to = self.he_to
        nxt = self.he_next
        face = self.he_face
        a0 = 2 * e
        b0 = a0 + 1
        a1 = nxt[a0]
        a2 = nxt[a1]
        b1 = nxt[b0]
        b2 = nxt[b1]
        va0 = to[a0]
        va1 = to[a1]
        vb0 = to[b0]
        vb1 = to[b1]
        fa = face[a0]
        fb = face[b0]

        to[a0] = va1
        to[b0] = vb1
        self._link(a0, a2)
        self._link(a2, b1)
        self._link(b1, a0)
        self._link(b0, b2)
        self._link(b2, a1)
        self._link(a1, b0)
        face[a1] = fb
        face[b1] = fa
        self.f_he[fa] = a0
        self.f_he[fb] = b0
        if self.v_he[va0] == b0:
            self.v_he[va0] = a1
        if self.v_he[vb0] == a0:
            self.v_he[vb0] = b1

        for I in (self.I11, self.I12, self.I22):
            m = 0.5 * (I[fa] + I[fb])
            I[fa] = m
            I[fb] = m
        return True

    # ------------------------------------------------------------------
    # export / compaction

    def vertex_array(self) -> np.ndarray:
        return np.column_stack([np.asarray(self.px), np.asarray(self.py)])

    def face_array(self) -> np.ndarray:
        """``(F_total, 3)`` vertex ids of every face slot (deleted ones included)."""
        f_he = np.asarray(self.f_he, dtype=np.int64)
        to = np.asarray(self.he_to, dtype=np.int64)
        nxt = np.asarray(self.he_next, dtype=np.int64)
        h1 = nxt[f_he]
        h2 = nxt[h1]
        return np.column_stack([to[f_he], to[h1], to[h2]])

    def live_faces(self) -> np.ndarray:
        return np.flatnonzero(~np.asarray(self.f_del, dtype=bool))

    def live_vertices(self) -> np.ndarray:
        return np.flatnonzero(~np.asarray(self.v_del, dtype=bool))

    def arrays(self):
        """Compact ``(verts, faces)`` over live elements, in id order."""
        vl = self.live_vertices()
        remap = np.full(len(self.px), -1, dtype=np.int64)
        remap[vl] = np.arange(len(vl))
        faces = self.face_array()[self.live_faces()]
        return self.vertex_array()[vl], remap[faces]

    def first_forms(self, faces=None) -> np.ndarray:
        I = np.column_stack([self.I11, self.I12, self.I22])
        return I if faces is None else I[faces]

    def compact(self) -> "HalfedgeMesh":
        """Return a rebuilt mesh without tombstones (ids renumbered in order)."""
        vl = self.live_vertices()
        fl = self.live_faces()
        verts, faces = self.arrays()
        return HalfedgeMesh.from_faces(
            verts,
            faces,
            L=np.asarray(self.L)[vl],
            kappa=np.asarray(self.kappa)[vl],
            first_forms=self.first_forms(fl),
        )

    def copy(self) -> "HalfedgeMesh":
        other = HalfedgeMesh.__new__(HalfedgeMesh)
        for key, val in self.__dict__.items():
            setattr(other, key, list(val) if isinstance(val, list) else val)
        return other

    def state(self) -> tuple:
        """Hashable snapshot of all connectivity and geometry (for equality tests)."""
        return tuple(tuple(v) if isinstance(v, list) else v for _, v in sorted(self.__dict__.items()))

    # ------------------------------------------------------------------
    # validation

    def boundary_loops(self) -> list[list[int]]:
        seen = set()
        loops = []
        nxt = self.he_next
        for h, f in enumerate(self.he_face):
            if f >= 0 or self.e_del[h >> 1] or h in seen:
                continue
            loop = []
            x = h
            while x not in seen:
                seen.add(x)
                loop.append(x)
                x = nxt[x]
            loops.append(loop)
        return loops

    def validate(self) -> None:
        """Check connectivity, orientation, manifoldness and Euler bookkeeping.

        Raises :class:`MeshError` describing the first violated invariant.
        """
        e_live = ~np.asarray(self.e_del, dtype=bool)
        h_live = np.repeat(e_live, 2)
        hs = np.flatnonzero(h_live)
        to = np.asarray(self.he_to)
        nxt = np.asarray(self.he_next)
        prev = np.asarray(self.he_prev)
        face = np.asarray(self.he_face)
        v_del = np.asarray(self.v_del, dtype=bool)
        f_del = np.asarray(self.f_del, dtype=bool)
        f_he = np.asarray(self.f_he)

        if np.any(v_del[to[hs]]):
            raise MeshError("halfedge points to a deleted vertex")
        if np.any(~h_live[nxt[hs]]) or np.any(prev[nxt[hs]] != hs):
            raise MeshError("next/prev inconsistent")
        if np.any(to[nxt[hs] ^ 1] != to[hs]):
            raise MeshError("next halfedge does not start where the previous one ends")
        if np.any(face[nxt[hs]] != face[hs]):
            raise MeshError("face inconsistent along a halfedge cycle")
        if np.any(to[hs] == to[hs ^ 1]):
            raise MeshError("degenerate edge")
        inner = hs[face[hs] >= 0]
        if np.any(f_del[face[inner]]):
            raise MeshError("halfedge references a deleted face")
        if np.any(nxt[nxt[nxt[inner]]] != inner):
            raise MeshError("non-triangular face")
        fl = np.flatnonzero(~f_del)
        if np.any(~h_live[f_he[fl]]) or np.any(face[f_he[fl]] != fl):
            raise MeshError("face halfedge inconsistent")

        vl = np.flatnonzero(~v_del)
        v_he = np.asarray(self.v_he)
        used = np.zeros(len(v_del), dtype=bool)
        used[to[hs]] = True
        if np.any(v_he[vl[used[vl]]] < 0):
            raise MeshError("vertex without outgoing halfedge")
        start = v_he[vl]
        ok = start >= 0
        if np.any(to[start[ok] ^ 1] != vl[ok]):
            raise MeshError("vertex halfedge does not start at the vertex")

        from_v = to[hs ^ 1]
        boundary_out = np.bincount(from_v[face[hs] < 0], minlength=len(v_del))
        if np.any(boundary_out > 1):
            raise MeshError("vertex with more than one boundary fan")
        if np.any((boundary_out[vl] == 1) & (face[np.maximum(start, 0)] >= 0)):
            raise MeshError("boundary vertex does not store its boundary halfedge")
        degree = np.bincount(from_v, minlength=len(v_del))
        fans = self._fan_sizes()
        if np.any(fans[vl] != degree[vl]):
            raise MeshError("vertex star is not a single fan")

        verts = self.vertex_array()
        faces = self.face_array()[fl]
        if len(faces) and np.min(signed_areas(verts, faces)) <= 0.0:
            raise MeshError("face with non-positive screen area")

        # V - E + F = sum over components of (2 - boundary loops)
        n_used = int(used.sum())
        ne = int(e_live.sum())
        if n_used:
            e_ids = np.flatnonzero(e_live)
            a = to[2 * e_ids]
            b = to[2 * e_ids + 1]
            g = sparse.coo_matrix((np.ones(len(a)), (a, b)), shape=(len(v_del), len(v_del)))
            _, labels = csgraph.connected_components(g, directed=False)
            comps = np.unique(labels[used])
            loops = self.boundary_loops()
            chi = n_used - ne + len(fl)
            expected = 2 * len(comps) - len(loops)
            if chi != expected:
                raise MeshError(f"Euler characteristic {chi} != {expected}")

"""Half-edge triangular mesh: connectivity, validation, normals, Laplacians.

Half-edge ``h`` lives in face ``h // 3`` at corner ``h % 3`` and points from
``faces[h // 3, h % 3]`` to ``faces[h // 3, (h % 3 + 1) % 3]``.  ``twin[h]``
is the opposite half-edge or -1 on the boundary, which gives O(1) twin/next
access without per-edge objects.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import MeshValidationError

COT_CLAMP = 1e4


@dataclass
class LaplacianMatrix:
    """Cotangent Laplacian of order ``order`` (1 or 2) as a sparse matrix."""

    matrix: sparse.csr_matrix
    order: int


class Mesh:
    """Immutable oriented manifold triangle mesh.

    Construction validates the connectivity: faces must be triangles with
    distinct vertex indices, every edge may carry at most two faces, and the
    winding must be globally consistent.  A closed mesh whose consistent
    orientation points inward (negative signed volume) is flipped once and a
    warning is issued; any other inconsistency is rejected.
    """

    def __init__(self, vertices, faces):
        self.vertices = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64).reshape(-1, 3))
        self.faces = np.ascontiguousarray(np.asarray(faces, dtype=np.int64).reshape(-1, 3))
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise MeshValidationError("face references vertex out of range")
        self._validate_and_build()
        self._normals = None
        self._adjacency = None
        self._edge_graph = None
        self._vertex_faces = None

    # -- construction helpers -------------------------------------------------

    def _validate_and_build(self):
        f = self.faces
        if f.size and ((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])).any():
            bad = int(np.where((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0]))[0][0])
            raise MeshValidationError(f"face {bad} repeats a vertex index")

        n_he = 3 * len(f)
        origin = f.reshape(-1)
        dest = f[:, [1, 2, 0]].reshape(-1)

        # undirected manifold check: an edge may appear in at most 2 faces
        lo = np.minimum(origin, dest)
        hi = np.maximum(origin, dest)
        und = lo.astype(np.int64) * len(self.vertices) + hi
        _, und_inv, und_count = np.unique(und, return_inverse=True, return_counts=True)
        if (und_count > 2).any():
            h = int(np.where(und_count[und_inv] > 2)[0][0])
            raise MeshValidationError(
                f"non-manifold edge ({origin[h]},{dest[h]}): shared by more than 2 faces"
            )

        # directed duplicates on a 2-face edge mean inconsistent winding
        di = origin.astype(np.int64) * len(self.vertices) + dest
        _, di_inv, di_count = np.unique(di, return_inverse=True, return_counts=True)
        if (di_count > 1).any():
            h = int(np.where(di_count[di_inv] > 1)[0][0])
            raise MeshValidationError(
                f"inconsistent orientation: edge ({origin[h]},{dest[h]}) traversed twice "
                "in the same direction"
            )

        # twin lookup via the reversed directed key
        rev = dest.astype(np.int64) * len(self.vertices) + origin
        order = np.argsort(di, kind="stable")
        pos = np.searchsorted(di[order], rev)
        pos = np.clip(pos, 0, max(n_he - 1, 0))
        twin = np.full(n_he, -1, dtype=np.int64)
        if n_he:
            cand = order[pos]
            hit = di[cand] == rev
            twin[hit] = cand[hit]
        self.twin = twin

        # a consistently wound closed mesh may still be inside out
        if n_he and not (twin == -1).any():
            vol = self._signed_volume()
            if vol < -1e-12 * max(1.0, abs(vol)):
                warnings.warn("mesh is consistently wound but inverted; flipping all faces")
                self.faces = np.ascontiguousarray(self.faces[:, [0, 2, 1]])
                self._validate_and_build()
                return

        isolated = np.setdiff1d(np.arange(len(self.vertices)), np.unique(self.faces))
        if isolated.size:
            warnings.warn(f"mesh has {isolated.size} isolated vertices (e.g. index {isolated[0]})")

    def _signed_volume(self):
        v = self.vertices
        a, b, c = v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    @classmethod
    def _trusted(cls, vertices, faces, twin):
        """Bypass validation when connectivity is known unchanged."""
        m = cls.__new__(cls)
        m.vertices = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64).reshape(-1, 3))
        m.faces = faces
        m.twin = twin
        m._normals = None
        m._adjacency = None
        m._edge_graph = None
        m._vertex_faces = None
        return m

    def with_positions(self, positions):
        """Same connectivity, new vertex positions."""
        positions = np.asarray(positions, dtype=np.float64)
        if positions.shape != self.vertices.shape:
            raise ValueError("position array shape mismatch")
        return Mesh._trusted(positions, self.faces, self.twin)

    # -- half-edge navigation -------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_halfedges(self):
        return 3 * len(self.faces)

    def halfedge_origin(self, h):
        return self.faces[h // 3, h % 3]

    def halfedge_dest(self, h):
        return self.faces[h // 3, (h % 3 + 1) % 3]

    @staticmethod
    def halfedge_next(h):
        return (h // 3) * 3 + (h % 3 + 1) % 3

    @staticmethod
    def halfedge_prev(h):
        return (h // 3) * 3 + (h % 3 + 2) % 3

    def boundary_halfedges(self):
        return np.where(self.twin == -1)[0]

    @property
    def n_boundary_edges(self):
        return int((self.twin == -1).sum())

    @property
    def is_closed(self):
        return self.n_boundary_edges == 0

    def edges(self):
        """Unique undirected edges as an (E, 2) array, lo < hi."""
        origin = self.faces.reshape(-1)
        dest = self.faces[:, [1, 2, 0]].reshape(-1)
        e = np.stack([np.minimum(origin, dest), np.maximum(origin, dest)], axis=1)
        return np.unique(e, axis=0)

    @property
    def n_edges(self):
        return len(self.edges())

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    def edge_lengths(self):
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def mean_edge_length(self):
        return float(self.edge_lengths().mean())

    def vertex_neighbors(self, v):
        """Sorted array of one-ring neighbor vertex indices."""
        if self._adjacency is None:
            self._adjacency = self._build_adjacency()
        a = self._adjacency
        return a.indices[a.indptr[v]:a.indptr[v + 1]]

    def _build_adjacency(self):
        e = self.edges()
        i = np.concatenate([e[:, 0], e[:, 1]])
        j = np.concatenate([e[:, 1], e[:, 0]])
        a = sparse.csr_matrix(
            (np.ones(len(i), dtype=np.int8), (i, j)),
            shape=(self.n_vertices, self.n_vertices),
        )
        a.sort_indices()
        return a

    def vertex_faces(self, v):
        """Indices of faces incident on vertex v."""
        if self._vertex_faces is None:
            fidx = np.repeat(np.arange(self.n_faces), 3)
            vidx = self.faces.reshape(-1)
            order = np.argsort(vidx, kind="stable")
            counts = np.bincount(vidx, minlength=self.n_vertices)
            self._vertex_faces = (fidx[order], np.concatenate([[0], np.cumsum(counts)]))
        data, ptr = self._vertex_faces
        return data[ptr[v]:ptr[v + 1]]

    def edge_graph(self):
        """Symmetric sparse matrix of edge lengths, for shortest paths."""
        if self._edge_graph is None:
            e = self.edges()
            w = np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)
            i = np.concatenate([e[:, 0], e[:, 1]])
            j = np.concatenate([e[:, 1], e[:, 0]])
            self._edge_graph = sparse.csr_matrix(
                (np.concatenate([w, w]), (i, j)), shape=(self.n_vertices, self.n_vertices)
            )
        return self._edge_graph

    # -- geometry --------------------------------------------------------------

    def face_normals(self, normalized=True):
        v = self.vertices
        n = np.cross(
            v[self.faces[:, 1]] - v[self.faces[:, 0]],
            v[self.faces[:, 2]] - v[self.faces[:, 0]],
        )
        if normalized:
            lens = np.linalg.norm(n, axis=1, keepdims=True)
            lens[lens == 0] = 1.0
            n = n / lens
        return n

    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_normals(normalized=False), axis=1)

    def vertex_normals(self):
        """Unit vertex normals, area-weighted average of incident face normals."""
        if self._normals is not None:
            return self._normals
        weighted = self.face_normals(normalized=False)  # |n| = 2 * area
        acc = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(acc, self.faces[:, k], weighted)
        lens = np.linalg.norm(acc, axis=1)
        incident = np.zeros(self.n_vertices, dtype=bool)
        incident[self.faces.reshape(-1)] = True
        if not incident.all():
            raise MeshValidationError(
                f"isolated vertex {int(np.where(~incident)[0][0])} has no normal"
            )
        if (lens == 0).any():
            raise MeshValidationError(
                f"vertex {int(np.where(lens == 0)[0][0])} has only degenerate faces"
            )
        self._normals = acc / lens[:, None]
        return self._normals

    def delete_faces(self, face_ids, compact=True):
        """Remove faces; with ``compact`` also drop vertices left unused.

        Returns ``(mesh, vertex_map)`` where ``vertex_map[old] = new`` or -1
        for dropped vertices.
        """
        keep = np.ones(self.n_faces, dtype=bool)
        keep[np.asarray(face_ids, dtype=int)] = False
        faces = self.faces[keep]
        vmap = np.arange(self.n_vertices)
        verts = self.vertices
        if compact:
            used = np.zeros(self.n_vertices, dtype=bool)
            used[faces.reshape(-1)] = True
            vmap = np.full(self.n_vertices, -1, dtype=np.int64)
            vmap[used] = np.arange(int(used.sum()))
            verts = self.vertices[used]
            faces = vmap[faces]
        return Mesh(verts, faces), vmap


def cotangent_laplacian(mesh, k=1):
    """Cotangent Laplacian L^k with zero row sums; k in {1, 2}.

    Off-diagonal weight for edge (i, j) is half the sum of the cotangents of
    the angles opposite to it; the diagonal makes rows sum to zero.
    Cotangents are clamped to +-1e4 so near-degenerate triangles cannot blow
    up the fairing solve.
    """
    if k not in (1, 2):
        raise ValueError(f"Laplacian order must be 1 or 2, got {k}")
    v, f = mesh.vertices, mesh.faces
    n = mesh.n_vertices
    ii, jj, ww = [], [], []
    for corner in range(3):
        o = f[:, corner]
        a = f[:, (corner + 1) % 3]
        b = f[:, (corner + 2) % 3]
        u = v[a] - v[o]
        w = v[b] - v[o]
        cross = np.linalg.norm(np.cross(u, w), axis=1)
        dot = np.einsum("ij,ij->i", u, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            cot = dot / cross
        bad = ~np.isfinite(cot) | (np.abs(cot) > COT_CLAMP)
        if bad.any():
            warnings.warn(f"clamped {int(bad.sum())} cotangent weights on near-degenerate triangles")
            cot = np.clip(np.nan_to_num(cot, nan=0.0, posinf=COT_CLAMP, neginf=-COT_CLAMP),
                          -COT_CLAMP, COT_CLAMP)
        half = 0.5 * cot
        ii.extend([a, b, a, b])
        jj.extend([b, a, a, b])
        ww.extend([half, half, -half, -half])
    L = sparse.csr_matrix(
        (np.concatenate(ww), (np.concatenate(ii), np.concatenate(jj))), shape=(n, n)
    )
    if k == 2:
        return LaplacianMatrix((L @ L).tocsr(), 2)
    return LaplacianMatrix(L, 1)

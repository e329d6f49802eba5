"""Hole detection, triangulation by advancing front, and Laplacian fairing.

Hole loops are stored counter-clockwise around the hole as seen from the
outward normal side, so the hole interior lies to the left of travel.  The
advancing front closes the smallest front angle first using three rules:

  theta <= 75 deg          connect the neighbors (1 triangle)
  75 deg < theta <= 135    one new vertex on the bisector (2 triangles)
  theta > 135 deg          two new vertices on the trisectors (3 triangles)

New edges target the mean boundary edge length of the loop being filled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from .errors import MeshValidationError, PipelineError
from .mesh import Mesh, cotangent_laplacian

RULE1_MAX = math.radians(75.0)
RULE2_MAX = math.radians(135.0)
SNAP_FACTOR = 0.3
BRIDGE_BETA = 0.5


@dataclass
class HoleLoop:
    """Closed cycle of boundary vertices, counter-clockwise around the hole."""

    vertices: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.int64)

    @property
    def length(self):
        return len(self.vertices)


@dataclass
class FillResult:
    """New geometry produced for one loop.

    ``new_faces`` indexes original vertices below ``base`` and rows of
    ``new_vertices`` (offset by ``base``) at or above it.
    """

    loop: HoleLoop
    base: int
    new_vertices: np.ndarray
    new_faces: np.ndarray


def detect_holes(mesh, exclude_outer=False):
    """All boundary loops; optionally drop the longest one (outer border)."""
    boundary = mesh.boundary_halfedges()
    if boundary.size == 0:
        return []
    out_of = {}
    for h in boundary:
        a = int(mesh.halfedge_origin(h))
        if a in out_of:
            raise MeshValidationError(f"non-manifold boundary at vertex {a}")
        out_of[a] = int(h)
    loops, seen = [], set()
    for h0 in boundary:
        if int(h0) in seen:
            continue
        cycle = []
        h = int(h0)
        while h not in seen:
            seen.add(h)
            cycle.append(int(mesh.halfedge_origin(h)))
            nxt = int(mesh.halfedge_dest(h))
            if nxt not in out_of:
                raise MeshValidationError(f"boundary walk breaks at vertex {nxt}")
            h = out_of[nxt]
        if len(set(cycle)) != len(cycle):
            raise MeshValidationError(
                "non-simple boundary loop (repeated vertex); repair the mesh first"
            )
        # boundary half-edges walk the hole clockwise; reverse for CCW
        loops.append(HoleLoop(np.asarray(cycle[::-1], dtype=np.int64)))
    if exclude_outer and len(loops) > 1:
        longest = max(range(len(loops)), key=lambda i: loops[i].length)
        loops = [lp for i, lp in enumerate(loops) if i != longest]
    return loops


def _loop_arc_lengths(loop, verts):
    p = verts[loop.vertices]
    return np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)


def split_complex_hole(loop, mesh, beta=BRIDGE_BETA):
    """Split a loop wherever two far-apart-on-the-loop vertices nearly touch.

    A bridge fires between non-adjacent loop vertices whose spatial distance
    is below ``beta`` times their along-loop distance; the split recurses on
    both sides.
    """
    n = loop.length
    if n <= 3:
        return [loop]
    verts = mesh.vertices
    edge_len = _loop_arc_lengths(loop, verts)
    cum = np.concatenate([[0.0], np.cumsum(edge_len)])
    total = cum[-1]

    best = None
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent through the wrap-around
            arc = cum[j] - cum[i]
            arc = min(arc, total - arc)
            if arc <= 0:
                continue
            d = np.linalg.norm(verts[loop.vertices[i]] - verts[loop.vertices[j]])
            ratio = d / arc
            if ratio < beta and (best is None or ratio < best[0]):
                best = (ratio, i, j)
    if best is None:
        return [loop]
    _, i, j = best
    first = HoleLoop(loop.vertices[i:j + 1])
    second = HoleLoop(np.concatenate([loop.vertices[j:], loop.vertices[:i + 1]]))
    out = []
    for sub in (first, second):
        out.extend(split_complex_hole(sub, mesh, beta) if sub.length > 3 else [sub])
    return out


class _Front:
    """Mutable polygon front over a growing vertex pool."""

    def __init__(self, loop_vertices, positions, normals):
        self.ring = list(int(v) for v in loop_vertices)
        self.positions = positions      # dict vertex id -> 3-vector
        self.normals = normals          # dict vertex id -> accumulated normal
        self.plane_override = None      # fallback projection normal

    def __len__(self):
        return len(self.ring)

    def angle_at(self, idx):
        """Interior (hole-side) angle at ring position idx, in (0, 2*pi)."""
        v = self.ring[idx]
        p = self.ring[idx - 1]
        nx = self.ring[(idx + 1) % len(self.ring)]
        to_p = self.positions[p] - self.positions[v]
        to_n = self.positions[nx] - self.positions[v]
        normal = self._projection_normal(v)
        tp = to_p - np.dot(to_p, normal) * normal
        tn = to_n - np.dot(to_n, normal) * normal
        if np.linalg.norm(tp) < 1e-15 or np.linalg.norm(tn) < 1e-15:
            tp, tn = to_p, to_n  # degenerate projection; fall back to 3D angle
        ang = math.atan2(float(np.dot(np.cross(tn, tp), normal)), float(np.dot(tn, tp)))
        return ang % (2.0 * math.pi)

    def _projection_normal(self, v):
        if self.plane_override is not None:
            return self.plane_override
        return self._unit_normal(v)

    def _unit_normal(self, v):
        n = self.normals[v]
        norm = np.linalg.norm(n)
        return n / norm if norm > 1e-300 else np.array([0.0, 0.0, 1.0])

    def adopt_plane_if_degenerate(self, angles):
        """Switch to the best-fit plane when every projected angle is flat.

        Boundaries like tube rims have surface normals lying *in* the hole
        plane; projected onto those normals the ring looks like a straight
        line (all angles pi) and no rule can make progress.  The front's own
        plane restores the real polygon angles; its sign is chosen so the
        ring stays counter-clockwise.
        """
        if self.plane_override is not None:
            return False  # already active for the angles just measured
        if max(abs(a - math.pi) for a in angles) > 1e-3:
            return False
        pts = np.array([self.positions[v] for v in self.ring])
        centered = pts - pts.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        e1, e2 = vt[0], vt[1]
        x, y = centered @ e1, centered @ e2
        area2 = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        normal = np.cross(e1, e2)
        self.plane_override = normal if area2 > 0 else -normal
        return True

    def spawn_directions(self, idx, fractions):
        """Unit vectors splitting the angle at ring position idx."""
        v = self.ring[idx]
        p = self.ring[idx - 1]
        nx = self.ring[(idx + 1) % len(self.ring)]
        normal = self._projection_normal(v)
        to_p = self.positions[p] - self.positions[v]
        to_n = self.positions[nx] - self.positions[v]
        e1 = to_n - np.dot(to_n, normal) * normal
        if np.linalg.norm(e1) < 1e-15:
            e1 = to_n
        e1 = e1 / np.linalg.norm(e1)
        e2 = np.cross(normal, e1)
        theta = self.angle_at(idx)
        return [math.cos(f * theta) * e1 + math.sin(f * theta) * e2 for f in fractions]


def advancing_front_fill(mesh, loop, max_stall=None):
    """Triangulate one hole loop; returns the new vertices and faces.

    The front may split when a spawned vertex snaps onto a non-adjacent
    front vertex (colliding fronts); each piece is then closed on its own.
    When the front stops shrinking (all angles above the connect threshold),
    the smallest angle is closed directly so the fill always terminates.
    """
    if loop.length < 3:
        raise PipelineError(f"cannot fill a loop of length {loop.length}")
    verts = mesh.vertices
    base = mesh.n_vertices
    ring = loop.vertices
    target = float(np.mean(np.linalg.norm(verts[np.roll(ring, -1)] - verts[ring], axis=1)))
    snap = SNAP_FACTOR * target

    positions = {int(v): verts[v].copy() for v in ring}
    vertex_normals = mesh.vertex_normals()
    normals = {int(v): vertex_normals[v].copy() for v in ring}

    # faces already incident on edges between loop vertices; a fill triangle
    # may never push an edge beyond two faces
    loop_set = set(int(v) for v in ring)
    edge_load = {}
    for face in mesh.faces:
        for a, b in ((face[0], face[1]), (face[1], face[2]), (face[2], face[0])):
            a, b = int(a), int(b)
            if a in loop_set and b in loop_set:
                key = (min(a, b), max(a, b))
                edge_load[key] = edge_load.get(key, 0) + 1

    new_positions = []
    new_faces = []

    def load(a, b):
        return edge_load.get((min(a, b), max(a, b)), 0)

    def addable(a, b, c):
        return load(a, b) <= 1 and load(b, c) <= 1 and load(c, a) <= 1

    def add_vertex(pos, normal_seed):
        vid = base + len(new_positions)
        new_positions.append(np.asarray(pos, dtype=np.float64))
        positions[vid] = new_positions[-1]
        normals[vid] = np.asarray(normal_seed, dtype=np.float64).copy()
        return vid

    def add_face(a, b, c):
        new_faces.append((a, b, c))
        for x, y in ((a, b), (b, c), (c, a)):
            key = (min(x, y), max(x, y))
            edge_load[key] = edge_load.get(key, 0) + 1
        fn = np.cross(positions[b] - positions[a], positions[c] - positions[a])
        for v in (a, b, c):
            normals[v] = normals[v] + fn

    fronts = [_Front(ring, positions, normals)]
    if max_stall is None:
        max_stall = max(64, loop.length ** 2)
    stall = 0
    best_total = sum(len(f) for f in fronts)

    while fronts:
        front = fronts.pop()
        if len(front) < 3:
            continue
        if len(front) == 3:
            a, b, c = front.ring
            add_face(a, b, c)
            continue

        angles = [front.angle_at(i) for i in range(len(front))]
        if front.adopt_plane_if_degenerate(angles):
            angles = [front.angle_at(i) for i in range(len(front))]
        # a front that only spawns (all angles wide) grows without bound, so
        # the forcing threshold must not scale with the current front size
        force_connect = stall > max(32, 2 * loop.length)
        done = False
        for idx in np.argsort(angles, kind="stable"):
            idx = int(idx)
            theta = angles[idx]
            v = front.ring[idx]
            p = front.ring[idx - 1]
            nx = front.ring[(idx + 1) % len(front)]

            rule1 = theta <= RULE1_MAX or force_connect
            if not rule1:
                # spawning right on top of a neighbor degrades to a connect
                (d,) = front.spawn_directions(idx, [0.5])
                probe = positions[v] + target * d
                if min(np.linalg.norm(probe - positions[p]),
                       np.linalg.norm(probe - positions[nx])) < snap:
                    rule1 = True

            if rule1:
                if p == nx or not addable(p, v, nx):
                    continue
                add_face(p, v, nx)
                front.ring.pop(idx)
                fronts.append(front)
            elif theta <= RULE2_MAX:
                (d,) = front.spawn_directions(idx, [0.5])
                q = _place(front, idx, positions[v] + target * d, snap, {p, v, nx}, load)
                if isinstance(q, tuple):
                    q = add_vertex(q[1], normals[v])
                add_face(p, v, q)
                add_face(v, nx, q)
                front.ring[idx] = q
                fronts.extend(_split_duplicates(front))
            else:
                d1, d2 = front.spawn_directions(idx, [1.0 / 3.0, 2.0 / 3.0])
                taken = {p, v, nx}
                q2 = _place(front, idx, positions[v] + target * d2, snap, taken, load)
                if isinstance(q2, tuple):
                    q2 = add_vertex(q2[1], normals[v])
                taken.add(q2)
                q1 = _place(front, idx, positions[v] + target * d1, snap, taken, load)
                if isinstance(q1, tuple):
                    q1 = add_vertex(q1[1], normals[v])
                add_face(p, v, q2)
                add_face(q2, v, q1)
                add_face(q1, v, nx)
                front.ring[idx:idx + 1] = [q2, q1]
                fronts.extend(_split_duplicates(front))
            done = True
            break

        if not done:
            raise PipelineError(
                f"advancing front wedged on a loop of length {loop.length}; "
                "no admissible triangle at any front vertex"
            )
        total = sum(len(f) for f in fronts)
        if total < best_total:
            best_total = total
            stall = 0
        else:
            stall += 1
            if stall > max_stall:
                raise PipelineError(
                    f"advancing front stopped shrinking after {stall} steps "
                    f"on a loop of length {loop.length}"
                )

    return FillResult(
        loop,
        base,
        np.asarray(new_positions, dtype=np.float64).reshape(-1, 3),
        np.asarray(new_faces, dtype=np.int64).reshape(-1, 3),
    )


def _place(front, idx, candidate, snap, excluded, load):
    """Either snap onto a nearby front vertex or report a fresh position.

    Returns a vertex id when snapping, else ``("new", position)``.
    """
    v = front.ring[idx]
    p = front.ring[idx - 1]
    nx = front.ring[(idx + 1) % len(front.ring)]
    best, best_d = None, snap
    for pos_idx, u in enumerate(front.ring):
        if u in excluded:
            continue
        d = float(np.linalg.norm(front.positions[u] - candidate))
        if d < best_d:
            # both pieces of the split must be fillable or already closed,
            # and the merged triangles may not saturate any edge
            between = (pos_idx - idx) % len(front.ring)
            if not (2 <= between <= len(front.ring) - 2):
                continue
            if load(v, u) > 0 or load(p, u) > 1 or load(nx, u) > 1:
                continue
            best, best_d = u, d
    if best is None:
        return ("new", candidate)
    return best


def _split_duplicates(front):
    """Split a front wherever a vertex occurs twice; yields simple fronts."""
    ring = front.ring
    seen = {}
    dup = None
    for i, v in enumerate(ring):
        if v in seen:
            dup = (seen[v], i)
            break
        seen[v] = i
    if dup is None:
        return [front]
    i, j = dup
    a = _Front(ring[i:j], front.positions, front.normals)
    b = _Front(ring[j:] + ring[:i], front.positions, front.normals)
    out = []
    for piece in (a, b):
        if len(piece) >= 3:
            out.extend(_split_duplicates(piece))
    return out


def apply_fills(mesh, fills):
    """Merge fill results into a new validated mesh.

    Returns ``(mesh, new_vertex_ids)`` with the ids of all inserted vertices
    in the merged mesh.
    """
    verts = [mesh.vertices]
    faces = [mesh.faces]
    new_ids = []
    offset = mesh.n_vertices
    for fill in fills:
        shifted = fill.new_faces.copy()
        mask = shifted >= fill.base
        shifted[mask] += offset - fill.base
        faces.append(shifted)
        verts.append(fill.new_vertices)
        new_ids.extend(range(offset, offset + len(fill.new_vertices)))
        offset += len(fill.new_vertices)
    merged = Mesh(np.vstack(verts), np.vstack(faces))
    return merged, np.asarray(new_ids, dtype=np.int64)


def fair_region(mesh, free_vertices, k=2):
    """Solve L^k x = b with non-free vertices pinned to their positions.

    Rows of free vertices keep the Laplacian stencil with zero right-hand
    side; fixed rows are replaced by identity carrying the boundary
    positions.  Fixed vertices come back bit-identical.
    """
    free = np.zeros(mesh.n_vertices, dtype=bool)
    free[np.asarray(list(free_vertices), dtype=np.int64)] = True
    if not free.any():
        return mesh.vertices.copy()
    L = cotangent_laplacian(mesh, k).matrix
    sel_free = diags(free.astype(np.float64))
    sel_fixed = diags((~free).astype(np.float64))
    system = (sel_free @ L + sel_fixed).tocsc()
    rhs = np.where(free[:, None], 0.0, mesh.vertices)
    try:
        solution = splu(system).solve(rhs)
    except RuntimeError as exc:
        raise PipelineError(f"fairing system is singular: {exc}") from exc
    if not np.isfinite(solution).all():
        raise PipelineError("fairing produced non-finite positions (isolated free vertex?)")
    defect = np.abs(system @ solution - rhs).max()
    if defect > 1e-6 * max(1.0, np.abs(rhs).max()):
        raise PipelineError(f"fairing solve failed to converge (defect {defect:.2e})")
    out = mesh.vertices.copy()
    out[free] = solution[free]
    return out

"""Per-patch local frames and height-map parameterization.

A patch frame is anchored at the seed: its rows are the tangent direction of
maximum discrete normal curvature, the cross product completing a
right-handed basis, and the seed normal.  Patch geometry expressed in this
frame becomes a scalar height field over the tangent plane, which is the
signal the dictionary is trained on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_FLAT_TOL = 1e-12


@dataclass
class Frame:
    origin: np.ndarray   # seed position
    axes: np.ndarray     # 3x3 orthonormal, rows (tangent, cotangent, normal)


@dataclass
class HeightMapSignal:
    uv: np.ndarray           # (k, 2) tangent-plane coordinates
    z: np.ndarray            # (k,) heights over the tangent plane
    vertex_ids: np.ndarray   # (k,) mesh vertex indices


def _project_tangent(vec, normal):
    return vec - np.dot(vec, normal) * normal


def max_curvature_direction(mesh, v):
    """Unit tangent along the one-ring edge of largest normal curvature.

    The curvature of edge e = p_i - p_v is estimated as 2<N, e>/|e|^2; the
    edge with the largest magnitude wins and is projected onto the tangent
    plane.  Flat or umbilic rings fall back to the lowest-index neighbor.
    """
    nbrs = mesh.vertex_neighbors(v)
    if len(nbrs) < 2:
        raise ValueError(f"vertex {v} has fewer than 2 neighbors")
    normal = mesh.vertex_normals()[v]
    edges = mesh.vertices[nbrs] - mesh.vertices[v]
    sq = np.einsum("ij,ij->i", edges, edges)
    kappa = 2.0 * (edges @ normal) / sq
    scale = 1.0 / np.sqrt(sq.mean())
    mags = np.abs(kappa)
    if mags.max() > _FLAT_TOL * scale and mags.max() - mags.min() > 1e-9 * mags.max():
        pick = int(np.argmax(mags))
        order = [pick] + [i for i in range(len(nbrs)) if i != pick]
    else:
        order = list(range(len(nbrs)))  # flat/umbilic: lowest neighbor index first
    for i in order:
        t = _project_tangent(edges[i], normal)
        norm = np.linalg.norm(t)
        if norm > 1e-12:
            return t / norm
    raise ValueError(f"vertex {v}: all one-ring edges are parallel to the normal")


def frame_from_normal_and_direction(origin, normal, direction):
    """Orthonormal frame rows (projected direction, normal x it, normal)."""
    normal = np.asarray(normal, dtype=np.float64)
    pt2 = _project_tangent(np.asarray(direction, dtype=np.float64), normal)
    norm = np.linalg.norm(pt2)
    if norm < 1e-8:
        raise ValueError("direction is parallel to the normal")
    pt2 = pt2 / norm
    r = np.cross(normal, pt2)
    return Frame(np.asarray(origin, dtype=np.float64).copy(), np.stack([pt2, r, normal]))


def build_frame(mesh, patch):
    """Right-handed orthonormal frame at the patch seed."""
    normal = mesh.vertex_normals()[patch.seed]
    t2 = max_curvature_direction(mesh, patch.seed)
    try:
        return frame_from_normal_and_direction(mesh.vertices[patch.seed], normal, t2)
    except ValueError:
        pass
    # curvature direction parallel to the normal: fall back to ring edges
    for nb in mesh.vertex_neighbors(patch.seed):
        edge = mesh.vertices[nb] - mesh.vertices[patch.seed]
        try:
            return frame_from_normal_and_direction(mesh.vertices[patch.seed], normal, edge)
        except ValueError:
            continue
    raise ValueError(f"patch seed {patch.seed}: no usable tangent direction")


def to_height_map(mesh, patch, frame):
    """Express patch vertices as (u, v) tangent coordinates plus height z."""
    local = (mesh.vertices[patch.vertices] - frame.origin) @ frame.axes.T
    return HeightMapSignal(local[:, :2].copy(), local[:, 2].copy(), patch.vertices.copy())


def from_height_map(signal, frame, z=None):
    """Map (uv, z) back to 3D positions; inverse of ``to_height_map``."""
    z = signal.z if z is None else np.asarray(z, dtype=np.float64)
    if len(z) != len(signal.uv):
        raise ValueError("height vector length does not match the signal")
    local = np.column_stack([signal.uv, z])
    return frame.origin + local @ frame.axes

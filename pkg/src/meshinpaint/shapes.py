"""Procedural meshes used by the tests, the demos and the docs."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh


def tetrahedron(scale=1.0):
    """Regular tetrahedron, outward-facing triangles."""
    v = np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64
    ) * (scale / np.sqrt(3.0))
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return Mesh(v, f)


def icosphere(subdivisions=2, radius=1.0):
    """Unit icosahedron subdivided ``subdivisions`` times, projected to a sphere."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    for _ in range(subdivisions):
        verts_list = [v for v in verts]
        midpoint = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint:
                m = verts_list[a] + verts_list[b]
                m /= np.linalg.norm(m)
                midpoint[key] = len(verts_list)
                verts_list.append(m)
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.asarray(verts_list)
        faces = np.asarray(new_faces)
    return Mesh(verts * radius, faces)


def grid(nx=10, ny=10, spacing=1.0):
    """Planar z=0 grid of right triangles, counter-clockwise seen from +z."""
    xs, ys = np.meshgrid(np.arange(nx + 1) * spacing, np.arange(ny + 1) * spacing)
    verts = np.stack([xs.reshape(-1), ys.reshape(-1), np.zeros(xs.size)], axis=1)
    faces = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b = a + 1
            c = a + nx + 1
            d = c + 1
            faces += [[a, b, d], [a, d, c]]
    return Mesh(verts, np.asarray(faces))


def equilateral_grid(nx=10, ny=10, spacing=1.0):
    """Planar sheet of equilateral triangles; every edge has the same length."""
    h = spacing * np.sqrt(3.0) / 2.0
    verts = []
    for j in range(ny + 1):
        off = 0.5 * spacing if j % 2 else 0.0
        for i in range(nx + 1):
            verts.append([i * spacing + off, j * h, 0.0])
    faces = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b = a + 1
            c = a + nx + 1
            d = c + 1
            if j % 2 == 0:
                faces += [[a, b, c], [b, d, c]]
            else:
                faces += [[a, b, d], [a, d, c]]
    return Mesh(np.asarray(verts), np.asarray(faces))


def cylinder(n_theta=32, n_z=10, radius=1.0, height=2.0):
    """Open tube around the z axis, outward normals."""
    thetas = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    zs = np.linspace(0, height, n_z + 1)
    verts = []
    for z in zs:
        for th in thetas:
            verts.append([radius * np.cos(th), radius * np.sin(th), z])
    faces = []
    for j in range(n_z):
        for i in range(n_theta):
            a = j * n_theta + i
            b = j * n_theta + (i + 1) % n_theta
            c = a + n_theta
            d = b + n_theta
            faces += [[a, b, d], [a, d, c]]
    return Mesh(np.asarray(verts), np.asarray(faces))


def punch_hole(mesh, center, n_faces=1):
    """Remove the ``n_faces`` faces nearest (by centroid) to ``center``.

    Returns ``(holey_mesh, vertex_map)``; the result is compacted so the
    boundary of the removed disk is the only new boundary.
    """
    center = np.asarray(center, dtype=np.float64)
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    order = np.argsort(np.linalg.norm(centroids - center, axis=1), kind="stable")
    return mesh.delete_faces(order[:n_faces])

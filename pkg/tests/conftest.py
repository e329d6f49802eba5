import numpy as np
import pytest

from meshinpaint.mesh import Mesh
from meshinpaint.shapes import cylinder, equilateral_grid, grid, icosphere, tetrahedron


@pytest.fixture(scope="session")
def tetra():
    return tetrahedron()


@pytest.fixture(scope="session")
def sphere_coarse():
    return icosphere(2)   # 162 vertices


@pytest.fixture(scope="session")
def sphere_fine():
    return icosphere(3)   # 642 vertices


@pytest.fixture(scope="session")
def plane_grid():
    return grid(8, 8)


@pytest.fixture(scope="session")
def unit_edge_grid():
    return equilateral_grid(10, 10, 1.0)


@pytest.fixture(scope="session")
def tube():
    return cylinder(48, 16)


def make_star_annulus(n, rng, jag=0.6):
    """Planar annulus whose inner boundary is a jagged star polygon."""
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    if np.min(np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))) < 0.05:
        angles = np.linspace(0, 2 * np.pi, n, endpoint=False) + rng.uniform(0, 0.5 / n, n)
    radii = 1.0 + jag * (rng.random(n) - 0.5) * (np.arange(n) % 2 == 0)
    xy = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    inner = np.column_stack([xy, np.zeros(n)])
    c = xy.mean(axis=0)
    spokes = xy - c
    lens = np.maximum(np.linalg.norm(spokes, axis=1, keepdims=True), 1e-9)
    outer_xy = c + spokes * 3.0 + 3.0 * spokes / lens
    outer = np.column_stack([outer_xy, np.zeros(n)])
    verts = np.vstack([inner, outer])
    faces = []
    for i in range(n):
        j = (i + 1) % n
        faces += [[i, n + j, n + i], [i, j, n + j]]
    return Mesh(verts, np.asarray(faces))


@pytest.fixture
def star_annulus_factory():
    return make_star_annulus

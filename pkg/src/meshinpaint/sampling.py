"""Seed sampling and geodesic-ball patches.

Geodesic distances are shortest paths on the mesh edge graph (Dijkstra);
farthest-point sampling on top of them yields seed sets that are both
r-covering and r-separated, with r the covering radius of the final set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .errors import PipelineError


@dataclass
class SeedSet:
    seeds: np.ndarray            # vertex indices
    covering_radius: float       # max over vertices of distance to the seeds

    def __post_init__(self):
        self.seeds = np.asarray(self.seeds, dtype=np.int64)


@dataclass
class Patch:
    """Vertices inside a geodesic ball around a seed vertex."""

    seed: int
    vertices: np.ndarray         # member vertex indices, sorted
    radius: float
    distances: np.ndarray = field(default=None, repr=False)  # d(seed, v) per member

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.int64)
        if self.distances is None:
            self.distances = np.zeros(len(self.vertices))


def geodesic_distances(mesh, sources, limit=np.inf):
    """Distance from every vertex to the nearest source along mesh edges."""
    sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    if sources.size == 0:
        raise ValueError("source set is empty")
    return dijkstra(mesh.edge_graph(), directed=False, indices=sources,
                    min_only=True, limit=limit)


def farthest_point_sampling(mesh, count, start=0):
    """Greedy farthest-point seed selection.

    Each new seed maximizes the distance to the ones already chosen (ties
    broken toward the lowest vertex index); the covering radius is measured
    after the full set is fixed.
    """
    n = mesh.n_vertices
    if not 1 <= count <= n:
        raise ValueError(f"seed count {count} not in [1, {n}]")
    seeds = [int(start)]
    dist = geodesic_distances(mesh, [start])
    for _ in range(count - 1):
        nxt = int(np.argmax(dist))
        seeds.append(nxt)
        dist = np.minimum(dist, geodesic_distances(mesh, [nxt]))
    finite = dist[np.isfinite(dist)]
    return SeedSet(np.asarray(seeds), float(finite.max()) if finite.size else 0.0)


def fps_until_radius(mesh, target_radius, start=0, max_count=None):
    """Keep adding farthest points until the covering radius drops to target."""
    n = mesh.n_vertices
    max_count = n if max_count is None else min(max_count, n)
    seeds = [int(start)]
    dist = geodesic_distances(mesh, [start])
    while len(seeds) < max_count:
        finite = dist[np.isfinite(dist)]
        if finite.size == 0 or finite.max() <= target_radius:
            break
        nxt = int(np.argmax(dist))
        seeds.append(nxt)
        dist = np.minimum(dist, geodesic_distances(mesh, [nxt]))
    finite = dist[np.isfinite(dist)]
    return SeedSet(np.asarray(seeds), float(finite.max()) if finite.size else 0.0)


def all_vertex_seeds(mesh):
    return SeedSet(np.arange(mesh.n_vertices), 0.0)


def compute_patch_radius(mesh, mode="all-vertices", seeds=None, sigma=1.5):
    """Patch radius: a geometry-coherent lower bound scaled by the overlap factor.

    ``all-vertices`` mode uses the mean edge length; ``sampled`` mode uses
    the covering radius of the seed set.
    """
    if sigma <= 0:
        raise ValueError(f"overlap factor must be positive, got {sigma}")
    if mode == "all-vertices":
        base = mesh.mean_edge_length()
    elif mode == "sampled":
        if seeds is None:
            raise ValueError("sampled mode needs a SeedSet")
        base = seeds.covering_radius
    else:
        raise ValueError(f"unknown radius mode {mode!r}")
    return float(base * sigma)


def build_patches(mesh, seeds, radius):
    """One geodesic-ball patch per seed; every patch must support plane fitting."""
    if radius <= 0:
        raise ValueError(f"patch radius must be positive, got {radius}")
    patches = []
    for s in seeds.seeds:
        d = geodesic_distances(mesh, [int(s)], limit=radius)
        members = np.where(d <= radius)[0]
        if len(members) < 3:
            raise PipelineError(
                f"patch at seed {int(s)} has only {len(members)} vertices; "
                "increase the radius or overlap factor"
            )
        patches.append(Patch(int(s), members, float(radius), d[members]))
    return patches

"""End-to-end flows behind the CLI: train, fill, inpaint, denoise.

Training always happens on the input mesh as given (its holes make no
patches since patches are seeded on vertices of the intact surface); the
inpainting stage samples fresh seeds over the hole-filled mesh at the
dictionary's own patch radius so the learned atoms stay on scale.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .config import PipelineConfig
from .errors import PipelineError
from .frames import build_frame, to_height_map
from .holefill import advancing_front_fill, apply_fills, detect_holes, fair_region, split_complex_hole
from .inpaint import (KnownVertexMask, adaptive_inpaint, build_grow_regions,
                      direct_inpaint)
from .sampling import (SeedSet, all_vertex_seeds, build_patches, compute_patch_radius,
                       farthest_point_sampling, fps_until_radius, geodesic_distances)
from .sparse import Dictionary, make_basis, sample_basis, ksvd_train


def default_seed_count(mesh):
    return max(1, math.ceil(mesh.n_vertices / 8))


def _training_seeds(mesh, cfg):
    if cfg.all_vertex_seeds:
        return all_vertex_seeds(mesh), "all-vertices"
    count = cfg.seeds if cfg.seeds is not None else default_seed_count(mesh)
    return farthest_point_sampling(mesh, min(count, mesh.n_vertices)), "sampled"


def patch_signals(mesh, patches, basis):
    out = []
    for p in patches:
        frame = build_frame(mesh, p)
        signal = to_height_map(mesh, p, frame)
        out.append((signal, sample_basis(basis, signal)))
    return out


def fallback_dictionary(basis, n_atoms):
    """Identity-column dictionary for degenerate (all-flat) training sets.

    Any signal the basis can represent exactly at zero height codes to zero
    against it, so flat regions reconstruct exactly.
    """
    m = basis.m_basis
    A = np.zeros((m, n_atoms))
    for i in range(n_atoms):
        A[i % m, i] = 1.0
    return Dictionary(basis, A)


def train_dictionary(mesh, cfg: PipelineConfig):
    """Learn a dictionary from the mesh; returns (dictionary, stats)."""
    seeds, mode = _training_seeds(mesh, cfg)
    radius = compute_patch_radius(mesh, mode, seeds, cfg.sigma)
    patches = build_patches(mesh, seeds, radius)
    basis = make_basis(cfg.basis, cfg.m_basis, radius)
    signals = patch_signals(mesh, patches, basis)
    stats = {
        "seed_mode": mode,
        "seed_count": len(seeds.seeds),
        "patch_radius": radius,
        "patch_count": len(patches),
        "mean_patch_size": float(np.mean([len(p.vertices) for p in patches])),
    }
    peak = max(float(np.linalg.norm(s.z)) for s, _ in signals)
    if peak <= 1e-12 * radius:
        warnings.warn("training surface is flat; using the identity fallback dictionary")
        dictionary = fallback_dictionary(basis, cfg.n_atoms)
        stats["fallback_flat_dictionary"] = True
        stats["residuals"] = []
        return dictionary, stats
    n_atoms = min(cfg.n_atoms, len(signals))
    if n_atoms < cfg.n_atoms:
        warnings.warn(f"only {len(signals)} training patches; reducing atoms to {n_atoms}")
    dictionary = ksvd_train(signals, basis, n_atoms, L=cfg.sparsity, eps=cfg.eps,
                            iterations=cfg.iterations, seed=cfg.rng_seed)
    stats["residuals"] = dictionary.training_residuals
    stats["n_atoms"] = n_atoms
    return dictionary, stats


def fill_holes(mesh, cfg: PipelineConfig):
    """Detect, split, triangulate and fair all holes.

    Returns ``(mesh, new_ids, border, stats)`` where ``border`` is the set of
    original boundary-loop vertices of the filled holes.
    """
    loops = detect_holes(mesh, exclude_outer=cfg.exclude_outer)
    stats = {"holes_found": len(loops), "loop_lengths": [lp.length for lp in loops]}
    if not loops:
        return mesh, np.zeros(0, dtype=np.int64), set(), stats
    sub_loops = []
    for lp in loops:
        sub_loops.extend(split_complex_hole(lp, mesh))
    stats["sub_holes"] = len(sub_loops)
    fills = [advancing_front_fill(mesh, lp) for lp in sub_loops]
    filled, new_ids = apply_fills(mesh, fills)
    stats["vertices_added"] = len(new_ids)
    stats["faces_added"] = int(sum(len(f.new_faces) for f in fills))

    # bi-Laplacian fairing only for the larger sub-holes
    free = []
    offset = mesh.n_vertices
    for fill, lp in zip(fills, sub_loops):
        count = len(fill.new_vertices)
        if lp.length > cfg.large_hole_threshold:
            free.extend(range(offset, offset + count))
        offset += count
    stats["faired_vertices"] = len(free)
    if free:
        filled = filled.with_positions(fair_region(filled, free, cfg.fair_order))
    border = set(int(v) for lp in loops for v in lp.vertices)
    return filled, new_ids, border, stats


def _inpaint_patches(mesh, radius, sigma, cfg, extra_seed_ids=()):
    """Seeds and patches over the extended mesh at the dictionary's radius.

    ``extra_seed_ids`` (filled and rim vertices) densify the hole region so
    that the growing-region chain from the border never strands a patch:
    every hole seed lies inside the patch of an adjacent, shallower seed.
    """
    if cfg.all_vertex_seeds:
        seeds = all_vertex_seeds(mesh)
    else:
        base = fps_until_radius(mesh, radius / max(sigma, 1.0))
        chosen = list(base.seeds)
        present = set(chosen)
        for v in sorted(int(v) for v in extra_seed_ids):
            if v not in present:
                chosen.append(v)
                present.add(v)
        seeds = SeedSet(np.asarray(chosen, dtype=np.int64), base.covering_radius)
    return build_patches(mesh, seeds, radius)


def inpaint_mesh(mesh, cfg: PipelineConfig, dictionary=None):
    """Full inpainting flow; returns (mesh, report dict)."""
    report = {"mode": cfg.mode}
    filled, new_ids, border, fill_stats = fill_holes(mesh, cfg)
    report.update(fill_stats)
    if fill_stats["holes_found"] == 0:
        report["notice"] = "no holes found; mesh returned unchanged"
        return mesh, report
    if cfg.fill_only:
        report["notice"] = "geometry-only fill (no sparse coding)"
        return filled, report

    if dictionary is None:
        dictionary, train_stats = train_dictionary(mesh, cfg)
        report["training"] = train_stats
    radius = dictionary.basis.domain_radius
    report["patch_radius"] = radius

    patches = _inpaint_patches(filled, radius, cfg.sigma, cfg,
                               extra_seed_ids=list(new_ids) + sorted(border))
    report["patch_count"] = len(patches)
    mask = KnownVertexMask.from_new_vertices(filled.n_vertices, new_ids)
    hole_ids = [i for i, p in enumerate(patches) if (~mask.known[p.vertices]).any()]
    hole_patches = [patches[i] for i in hole_ids]
    report["hole_patches"] = len(hole_patches)
    if not hole_patches:
        report["notice"] = "filled vertices are covered by no patch; geometry-only result"
        return filled, report

    depth = geodesic_distances(filled, sorted(border))
    deepest = float(depth[new_ids].max()) if len(new_ids) else 0.0
    report["hole_depth"] = deepest
    if cfg.mode == "direct" and 2.0 * deepest > radius:
        warnings.warn(
            "hole extends beyond the patch radius; adaptive mode is the "
            "recommended choice for large holes"
        )

    if cfg.mode == "direct":
        result = direct_inpaint(filled, dictionary, hole_patches, mask,
                                L=cfg.sparsity, eps=cfg.eps, h=cfg.h,
                                mode=cfg.reconstruction_mode, squared=cfg.nlm_squared)
        report["levels"] = 1 if result.residual_norms else 0
    else:
        regions = build_grow_regions(hole_patches, mask, border)
        result = adaptive_inpaint(filled, dictionary, hole_patches, mask, regions,
                                  L=cfg.sparsity, eps=cfg.eps, h=cfg.h,
                                  mode=cfg.reconstruction_mode, squared=cfg.nlm_squared,
                                  reproject=cfg.reproject_codes)
        report["levels"] = regions.depth
        report["level_sizes"] = [len(lv) for lv in regions.levels]

    positions = result.positions
    if cfg.freeze_known:
        positions = positions.copy()
        positions[mask.known] = filled.vertices[mask.known]
    report["coded_patches"] = len(result.estimates.codes)
    if result.residual_norms:
        report["residual_mean"] = float(np.mean(result.residual_norms))
        report["residual_max"] = float(np.max(result.residual_norms))
        report["patch_residuals"] = [float(r) for r in result.residual_norms]
    report["effective_sparsity"] = result.effective_sparsity
    return filled.with_positions(positions), report


def denoise_mesh(mesh, cfg: PipelineConfig, dictionary=None):
    """All-known masked coding plus reconstruction over every patch."""
    if mesh.n_faces == 0:
        raise PipelineError("mesh has no faces to denoise")
    report = {}
    if dictionary is None:
        dictionary, train_stats = train_dictionary(mesh, cfg)
        report["training"] = train_stats
    radius = dictionary.basis.domain_radius
    patches = _inpaint_patches(mesh, radius, cfg.sigma, cfg)
    report["patch_count"] = len(patches)
    mask = KnownVertexMask.all_known(mesh.n_vertices)
    result = direct_inpaint(mesh, dictionary, patches, mask,
                            L=cfg.sparsity, eps=cfg.eps, h=cfg.h,
                            mode=cfg.reconstruction_mode, squared=cfg.nlm_squared)
    if result.residual_norms:
        report["residual_mean"] = float(np.mean(result.residual_norms))
        report["residual_max"] = float(np.max(result.residual_norms))
        report["patch_residuals"] = [float(r) for r in result.residual_norms]
    report["effective_sparsity"] = result.effective_sparsity
    return mesh.with_positions(result.positions), report


def vertex_to_surface_rms(points, reference, chunk=256):
    """RMS of exact point-to-triangle distances against a reference mesh."""
    tri = reference.vertices[reference.faces]
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        block = np.asarray(points[start:start + chunk])
        d = _point_triangle_distance(block, tri)
        out[start:start + len(block)] = d.min(axis=1)
    return float(np.sqrt(np.mean(out**2))), out


def _point_triangle_distance(points, tri):
    """Pairwise distances (|P| x |T|) from points to solid triangles."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab = b - a
    ac = c - a
    p = points[:, None, :] - a[None, :, :]
    d00 = np.einsum("ij,ij->i", ab, ab)[None, :]
    d01 = np.einsum("ij,ij->i", ab, ac)[None, :]
    d11 = np.einsum("ij,ij->i", ac, ac)[None, :]
    d20 = np.einsum("pij,ij->pi", p, ab)
    d21 = np.einsum("pij,ij->pi", p, ac)
    denom = np.maximum(d00 * d11 - d01 * d01, 1e-300)
    v = (d11 * d20 - d01 * d21) / denom
    w = (d00 * d21 - d01 * d20) / denom
    v = np.clip(v, 0.0, 1.0)
    w = np.clip(w, 0.0, 1.0)
    scale = np.maximum(v + w, 1.0)
    v, w = v / scale, w / scale
    closest = a[None, :, :] + v[..., None] * ab[None, :, :] + w[..., None] * ac[None, :, :]
    d_face = np.linalg.norm(points[:, None, :] - closest, axis=2)
    # clamped barycentrics are not exact on edge regions; refine with edges
    for e0, e1 in ((a, b), (b, c), (c, a)):
        seg = e1 - e0
        t = np.einsum("pij,ij->pi", points[:, None, :] - e0[None, :, :], seg)
        t = np.clip(t / np.maximum(np.einsum("ij,ij->i", seg, seg), 1e-300)[None, :], 0, 1)
        proj = e0[None, :, :] + t[..., None] * seg[None, :, :]
        d_face = np.minimum(d_face, np.linalg.norm(points[:, None, :] - proj, axis=2))
    return d_face

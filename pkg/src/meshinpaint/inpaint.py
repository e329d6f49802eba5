"""Sparse-coding inpainting over a hole-filled mesh.

Direct mode sparse-codes every supplied patch against the rows of its
sampled dictionary that fall on known vertices, then evaluates the coded
atoms everywhere, unknown vertices included.  Adaptive mode orders the hole
patches into growing regions and propagates codes level by level from the
hole border inward, re-reading the geometry after each level.  Either way a
vertex ends up with one position estimate per covering patch; the final
position blends them uniformly or with non-local-means weights computed
from sparse-code similarity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse as sp

from .errors import PipelineError
from .frames import build_frame, from_height_map, to_height_map
from .sparse import omp, sample_basis


@dataclass
class KnownVertexMask:
    """Boolean flag per vertex of the extended mesh; True means known."""

    known: np.ndarray

    def __post_init__(self):
        self.known = np.asarray(self.known, dtype=bool)

    @classmethod
    def from_new_vertices(cls, n_vertices, new_ids):
        known = np.ones(n_vertices, dtype=bool)
        known[np.asarray(new_ids, dtype=np.int64)] = False
        return cls(known)

    @classmethod
    def all_known(cls, n_vertices):
        return cls(np.ones(n_vertices, dtype=bool))

    def known_indices(self):
        return np.where(self.known)[0]

    def unknown_indices(self):
        return np.where(~self.known)[0]

    def projection_matrix(self):
        """Sparse selector M with M @ x = x[known]."""
        rows = np.arange(int(self.known.sum()))
        cols = self.known_indices()
        return sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(rows), len(self.known))
        )


@dataclass
class GrowRegions:
    """Leveled patch index sets, hole border outward-in."""

    levels: list

    @property
    def depth(self):
        return len(self.levels)


@dataclass
class VertexEstimates:
    """Per-vertex position estimates from the patches covering it."""

    positions: dict = field(default_factory=dict)   # vertex -> list of (patch id, xyz)
    codes: dict = field(default_factory=dict)       # patch id -> code vector
    anchor: dict = field(default_factory=dict)      # vertex -> nearest-seed patch id

    def add(self, vertex, patch_id, pos):
        self.positions.setdefault(int(vertex), []).append((patch_id, np.asarray(pos)))

    def count(self, vertex):
        return len(self.positions.get(int(vertex), ()))


@dataclass
class InpaintResult:
    positions: np.ndarray
    estimates: VertexEstimates
    residual_norms: list
    effective_sparsity: float = 0.0
    levels: list = None


def _patch_eps(z_known, eps):
    return 1e-4 * float(np.linalg.norm(z_known)) if eps is None else float(eps)


def code_patch_masked(signal, sampled, dictionary, known_rows, L, eps=None):
    """OMP restricted to the known rows of the patch dictionary."""
    if len(known_rows) == 0:
        raise PipelineError("patch has no known vertices; masked coding impossible")
    D = sampled.phi @ dictionary.coefficients
    budget = min(L, len(known_rows))
    z_known = signal.z[known_rows]
    return omp(z_known, D[known_rows], budget, _patch_eps(z_known, eps))


def _fill_anchors(estimates, patches, patch_ids):
    """alpha_v is the code of the covering patch whose seed is nearest v."""
    dist = {}
    for pid in patch_ids:
        p = patches[pid]
        for row, v in enumerate(p.vertices):
            v = int(v)
            d = float(p.distances[row])
            if v not in dist or d < dist[v] or (d == dist[v] and pid < estimates.anchor[v]):
                dist[v] = d
                estimates.anchor[v] = pid


def direct_inpaint(mesh, dictionary, patches, mask, L=4, eps=None,
                   h=None, mode="nlm", squared=False):
    """Masked sparse coding of every supplied patch, then blending.

    With an all-known mask this is plain patch-wise denoising.
    """
    estimates = VertexEstimates()
    residuals = []
    for pid, patch in enumerate(patches):
        frame = build_frame(mesh, patch)
        signal = to_height_map(mesh, patch, frame)
        sampled = sample_basis(dictionary.basis, signal)
        known_rows = np.where(mask.known[patch.vertices])[0]
        if len(known_rows) == 0:
            raise PipelineError(
                f"patch at seed {patch.seed} contains no known vertices; "
                "use adaptive mode for holes larger than the patch radius"
            )
        code = code_patch_masked(signal, sampled, dictionary, known_rows, L, eps)
        residuals.append(code.residual_norm)
        estimates.codes[pid] = code.alpha
        z_new = sampled.phi @ (dictionary.coefficients @ code.alpha)
        pos = from_height_map(signal, frame, z_new)
        for row, v in enumerate(signal.vertex_ids):
            estimates.add(v, pid, pos[row])
    _fill_anchors(estimates, patches, range(len(patches)))
    positions = reconstruct(estimates, h=h, mode=mode,
                            base_positions=mesh.vertices, squared=squared)
    nnz = [int(np.count_nonzero(a)) for a in estimates.codes.values()]
    return InpaintResult(positions, estimates, residuals,
                         float(np.mean(nnz)) if nnz else 0.0)


def build_grow_regions(patches, mask, border_set):
    """Level the hole patches: border-touching first, then seed-reachable.

    A hole patch is one containing at least one unknown vertex.  Level 0
    holds those meeting the border set; level i those whose seed lies in the
    vertex span of level i-1.  Every hole patch must land in exactly one
    level, otherwise the hole is unreachable.
    """
    border = set(int(v) for v in border_set)
    candidates = [i for i, p in enumerate(patches) if (~mask.known[p.vertices]).any()]
    if not candidates:
        return GrowRegions([])
    unassigned = set(candidates)
    level0 = [i for i in candidates if any(int(v) in border for v in patches[i].vertices)]
    if not level0:
        raise PipelineError("no hole patch touches the border; regions are unreachable")
    levels = [np.asarray(sorted(level0), dtype=np.int64)]
    unassigned -= set(level0)
    while unassigned:
        span = set()
        for i in levels[-1]:
            span.update(int(v) for v in patches[i].vertices)
        nxt = sorted(i for i in unassigned if int(patches[i].seed) in span)
        if not nxt:
            raise PipelineError(
                f"{len(unassigned)} hole patches unreachable from the border "
                "(disconnected fill?)"
            )
        levels.append(np.asarray(nxt, dtype=np.int64))
        unassigned -= set(nxt)
    return GrowRegions(levels)


def propagation_weights(patch, coded_ids, patches):
    """Overlap-proportional weights over the already-coded neighbor patches."""
    mine = set(int(v) for v in patch.vertices)
    neighbors, overlaps = [], []
    for pid in coded_ids:
        ov = len(mine.intersection(int(v) for v in patches[pid].vertices))
        if ov > 0:
            neighbors.append(pid)
            overlaps.append(ov)
    if not neighbors:
        return [], np.zeros(0)
    w = np.asarray(overlaps, dtype=np.float64)
    return neighbors, w / w.sum()


def adaptive_inpaint(mesh, dictionary, patches, mask, regions, L=4, eps=None,
                     h=None, mode="nlm", squared=False, reproject=False):
    """Propagate sparse codes from the hole border toward the interior.

    Level 0 patches are masked-coded; deeper patches average the codes of
    overlapping patches from lower levels.  After each level the unknown
    vertices covered so far move to the mean of their estimates, so deeper
    frames and height maps see the updated geometry.
    """
    if regions.depth == 0:
        return InpaintResult(mesh.vertices.copy(), VertexEstimates(), [], 0.0, levels=[])
    estimates = VertexEstimates()
    residuals = []
    working = mesh.vertices.copy()
    coded_lower = []   # patches from strictly lower levels only
    for level_no, level in enumerate(regions.levels):
        level_mesh = mesh.with_positions(working)
        for pid in level:
            pid = int(pid)
            patch = patches[pid]
            frame = build_frame(level_mesh, patch)
            signal = to_height_map(level_mesh, patch, frame)
            sampled = sample_basis(dictionary.basis, signal)
            if level_no == 0:
                known_rows = np.where(mask.known[patch.vertices])[0]
                if len(known_rows) == 0:
                    raise PipelineError(
                        f"level-0 patch at seed {patch.seed} has no known vertices; "
                        "regions are inconsistent"
                    )
                code = code_patch_masked(signal, sampled, dictionary, known_rows, L, eps)
                residuals.append(code.residual_norm)
                alpha = code.alpha
            else:
                neighbors, weights = propagation_weights(patch, coded_lower, patches)
                if not neighbors:
                    raise PipelineError(
                        f"patch at seed {patch.seed} overlaps no coded patch; "
                        "regions are inconsistent"
                    )
                alpha = np.zeros(dictionary.n_atoms)
                for nb, w in zip(neighbors, weights):
                    alpha = alpha + w * estimates.codes[nb]
                if reproject:
                    z_hat = sampled.phi @ (dictionary.coefficients @ alpha)
                    alpha = omp(z_hat, sampled.phi @ dictionary.coefficients, L,
                                _patch_eps(z_hat, eps)).alpha
            estimates.codes[pid] = alpha
            z_new = sampled.phi @ (dictionary.coefficients @ alpha)
            pos = from_height_map(signal, frame, z_new)
            for row, v in enumerate(signal.vertex_ids):
                estimates.add(v, pid, pos[row])
        coded_lower.extend(int(i) for i in level)
        # unknown vertices seen so far move to the mean of their estimates
        for v, entries in estimates.positions.items():
            if not mask.known[v]:
                working[v] = np.mean([e[1] for e in entries], axis=0)
    all_ids = [int(i) for level in regions.levels for i in level]
    _fill_anchors(estimates, patches, all_ids)
    positions = reconstruct(estimates, h=h, mode=mode,
                            base_positions=mesh.vertices, squared=squared)
    nnz = [int(np.count_nonzero(a)) for a in estimates.codes.values()]
    return InpaintResult(positions, estimates, residuals,
                         float(np.mean(nnz)) if nnz else 0.0,
                         levels=[len(lv) for lv in regions.levels])


def nlm_weights(anchor_code, codes, h, squared=False):
    """Similarity weights between a vertex's anchor code and its patch codes.

    The exponent uses the plain norm of the code difference by default; the
    ``squared`` switch matches the image-domain convention instead.  Shifting
    by the smallest distance keeps the largest weight at 1 before
    normalization, so tiny ``h`` cannot underflow every weight to zero.
    """
    if h <= 0:
        raise ValueError(f"filtering parameter h must be positive, got {h}")
    d = np.asarray([np.linalg.norm(anchor_code - c) for c in codes])
    if squared:
        d = d**2
    d = d - d.min()
    w = np.exp(-d / h**2)
    return w / w.sum()


def default_h(estimates, squared=False):
    """Data-driven filtering degree from the overlapping-patch code distances.

    h is set so that the exponential weight at the median pairwise code
    distance is e^-1, i.e. h = sqrt(median) (median for the squared
    variant); this keeps the blend softness independent of the absolute
    code scale.
    """
    pairs = set()
    for entries in estimates.positions.values():
        ids = [pid for pid, _ in entries]
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                pairs.add((min(ids[i], ids[j]), max(ids[i], ids[j])))
    dists = [np.linalg.norm(estimates.codes[a] - estimates.codes[b]) for a, b in pairs]
    if not dists:
        return 1.0
    med = float(np.median(dists))
    if med <= 1e-12:
        return 1.0
    return float(np.sqrt(med)) if not squared else med


def reconstruct(estimates, h=None, mode="nlm", base_positions=None, squared=False):
    """Blend per-vertex estimates into final positions.

    ``uniform`` averages the estimates; ``nlm`` weights them by sparse-code
    similarity against the vertex's anchor code with filtering degree ``h``
    (data-driven when omitted, see ``default_h``).
    """
    if mode not in ("uniform", "nlm"):
        raise ValueError(f"unknown reconstruction mode {mode!r}")
    if base_positions is None:
        raise ValueError("reconstruct needs the base positions to update")
    out = np.array(base_positions, dtype=np.float64, copy=True)
    if mode == "nlm" and h is None:
        h = default_h(estimates, squared)
    for v, entries in estimates.positions.items():
        pts = np.asarray([e[1] for e in entries])
        if mode == "uniform":
            out[v] = pts.mean(axis=0)
        else:
            anchor = estimates.codes[estimates.anchor[v]]
            codes = [estimates.codes[pid] for pid, _ in entries]
            w = nlm_weights(anchor, codes, h, squared)
            out[v] = w @ pts
    return out

"""Surface inpainting for triangular meshes via learned patch dictionaries."""

from .errors import MeshParseError, MeshValidationError, PipelineError
from .mesh import Mesh, LaplacianMatrix, cotangent_laplacian
from .meshio import load_mesh, save_mesh
from .sampling import (SeedSet, Patch, geodesic_distances, farthest_point_sampling,
                       compute_patch_radius, build_patches)
from .frames import Frame, HeightMapSignal, max_curvature_direction, build_frame, \
    to_height_map, from_height_map
from .sparse import (BasisSet, SampledBasis, Dictionary, SparseCode, make_basis,
                     sample_basis, omp, ksvd_train, init_dictionary,
                     save_dictionary, load_dictionary)
from .holefill import (HoleLoop, FillResult, detect_holes, split_complex_hole,
                       advancing_front_fill, apply_fills, fair_region)
from .inpaint import (KnownVertexMask, GrowRegions, VertexEstimates, direct_inpaint,
                      build_grow_regions, adaptive_inpaint, reconstruct)
from .config import PipelineConfig, build_config
from .pipeline import train_dictionary, fill_holes, inpaint_mesh, denoise_mesh

__version__ = "0.1.0"

__all__ = [
    "Mesh", "LaplacianMatrix", "cotangent_laplacian", "load_mesh", "save_mesh",
    "SeedSet", "Patch", "geodesic_distances", "farthest_point_sampling",
    "compute_patch_radius", "build_patches",
    "Frame", "HeightMapSignal", "max_curvature_direction", "build_frame",
    "to_height_map", "from_height_map",
    "BasisSet", "SampledBasis", "Dictionary", "SparseCode", "make_basis",
    "sample_basis", "omp", "ksvd_train", "init_dictionary",
    "save_dictionary", "load_dictionary",
    "HoleLoop", "FillResult", "detect_holes", "split_complex_hole",
    "advancing_front_fill", "apply_fills", "fair_region",
    "KnownVertexMask", "GrowRegions", "VertexEstimates", "direct_inpaint",
    "build_grow_regions", "adaptive_inpaint", "reconstruct",
    "PipelineConfig", "build_config",
    "train_dictionary", "fill_holes", "inpaint_mesh", "denoise_mesh",
    "MeshParseError", "MeshValidationError", "PipelineError",
    "__version__",
]

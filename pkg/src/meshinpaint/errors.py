"""Exception types shared across the package.

The CLI maps these onto exit codes: parse errors -> 2, pipeline
infeasibility -> 3, mesh validation failures -> 4.
"""


class MeshParseError(ValueError):
    """A mesh file could not be read or written."""


class MeshValidationError(ValueError):
    """Mesh connectivity violates the manifold/orientation requirements."""


class PipelineError(RuntimeError):
    """The inpainting pipeline cannot proceed on this input."""

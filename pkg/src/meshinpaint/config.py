"""Pipeline configuration: defaults, config-file parsing, flag overrides.

Precedence is flags over config file over defaults.  The config file is a
flat ``key = value`` text format; unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class PipelineConfig:
    sigma: float = 1.5               # patch overlap factor
    seeds: int | None = None         # seed count; None -> ceil(|V| / 8)
    all_vertex_seeds: bool = False
    basis: str = "cosine"            # gaussian | cosine
    m_basis: int = 16
    n_atoms: int = 64
    sparsity: int = 4                # L, max non-zeros per code
    eps: float | None = None         # residual tolerance; None -> 1e-4 * signal norm
    iterations: int = 20             # dictionary-learning sweeps
    mode: str = "adaptive"           # adaptive | direct
    h: float | None = None           # NLM filtering degree; None -> data-driven
    nlm: bool = True
    nlm_squared: bool = False        # square the code distance in the exponent
    fair_order: int = 2
    large_hole_threshold: int = 8    # fairing kicks in above this loop length
    freeze_known: bool = False
    reproject_codes: bool = False    # re-run OMP on propagated codes
    fill_only: bool = False
    exclude_outer: bool = False      # skip the longest boundary loop
    rng_seed: int = 0
    threads: int = 1

    def validate(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.seeds is not None and self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.seeds is not None and self.all_vertex_seeds:
            raise ValueError("choose either a seed count or all-vertex seeding, not both")
        if self.basis not in ("gaussian", "cosine"):
            raise ValueError(f"basis must be gaussian or cosine, got {self.basis!r}")
        if self.m_basis < 1:
            raise ValueError("m_basis must be >= 1")
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        if self.sparsity < 1:
            raise ValueError("sparsity must be >= 1")
        if self.eps is not None and self.eps < 0:
            raise ValueError("eps must be non-negative")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mode not in ("adaptive", "direct"):
            raise ValueError(f"mode must be adaptive or direct, got {self.mode!r}")
        if self.h is not None and self.h <= 0:
            raise ValueError("h must be positive")
        if self.fair_order not in (1, 2):
            raise ValueError("fair_order must be 1 or 2")
        if self.large_hole_threshold < 3:
            raise ValueError("large_hole_threshold must be >= 3")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        return self

    @property
    def reconstruction_mode(self):
        return "nlm" if self.nlm else "uniform"


_BOOL_WORDS = {"true": True, "on": True, "yes": True, "1": True,
               "false": False, "off": False, "no": False, "0": False}


def _coerce(name, kind, text):
    text = text.strip()
    if text.lower() == "none":
        return None
    if kind is bool:
        if text.lower() not in _BOOL_WORDS:
            raise ValueError(f"config key {name}: cannot read {text!r} as a boolean")
        return _BOOL_WORDS[text.lower()]
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def load_config_file(path):
    """Parse a flat key = value config file into an override dict."""
    known = {}
    for f in fields(PipelineConfig):
        kind = f.type
        if kind in ("int | None", "float | None"):
            kind = int if "int" in kind else float
        else:
            kind = {"float": float, "int": int, "bool": bool, "str": str}[kind]
        known[f.name] = kind
    overrides = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"{path}:{ln}: unknown config key {key!r}")
        overrides[key] = _coerce(key, known[key], value)
    return overrides


def build_config(file_path=None, **flag_overrides):
    """Defaults, then config file, then explicit flags."""
    values = {}
    if file_path is not None:
        values.update(load_config_file(file_path))
    values.update({k: v for k, v in flag_overrides.items() if v is not None})
    return PipelineConfig(**values).validate()

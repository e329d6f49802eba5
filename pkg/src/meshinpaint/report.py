"""Run reports: delimited text, JSON, and matplotlib figures.

When the CLI gets a report path it writes the machine-readable key-value
file there and renders the relevant figures next to it (same stem): the
training residual curve, a grid of dictionary atoms rendered as height
maps, and histograms of coding residuals or reference deviations.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def flatten_report(report, prefix=""):
    """Flatten nested dicts into sorted ``key = value`` pairs."""
    items = []
    for key, value in report.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            items.extend(flatten_report(value, prefix=f"{name}."))
        elif isinstance(value, (list, tuple)) and len(value) > 12:
            items.append((name, f"[{len(value)} values]"))
        else:
            items.append((name, value))
    return sorted(items)


def format_report(report):
    lines = [f"{key} = {value}" for key, value in flatten_report(report)]
    return "\n".join(lines)


def write_json_report(report, path):
    def default(obj):
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, (np.floating,)):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        raise TypeError(f"cannot serialize {type(obj)}")

    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True, default=default) + "\n")


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def save_residual_curve(residuals, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(np.arange(1, len(residuals) + 1), residuals, marker="o", ms=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean residual")
    ax.set_title("dictionary training")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_atom_grid(dictionary, path, resolution=24, max_atoms=64):
    """Render atoms as height maps over the patch domain."""
    plt = _pyplot()
    basis = dictionary.basis
    r = basis.domain_radius
    axis = np.linspace(-r, r, resolution)
    uu, vv = np.meshgrid(axis, axis)
    inside = uu**2 + vv**2 <= r**2
    uv = np.stack([uu[inside], vv[inside]], axis=1)
    phi = basis.evaluate(uv)
    n = min(dictionary.n_atoms, max_atoms)
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(1.1 * cols, 1.1 * rows))
    axes = np.atleast_1d(axes).reshape(-1)
    for i in range(n):
        img = np.full(uu.shape, np.nan)
        img[inside] = phi @ dictionary.coefficients[:, i]
        axes[i].imshow(img, origin="lower", cmap="viridis")
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.suptitle(f"{n} of {dictionary.n_atoms} atoms ({basis.kind} basis)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_histogram(values, path, xlabel, title):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist(np.asarray(values), bins=min(40, max(5, len(values) // 4 + 1)))
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def emit(report, json_path=None, dictionary=None, residual_curve=None,
         residual_hist=None, deviations=None):
    """Write the JSON report and its figures; returns the written paths."""
    written = []
    if json_path is None:
        return written
    json_path = Path(json_path)
    write_json_report(report, json_path)
    written.append(json_path)
    stem = json_path.with_suffix("")
    if residual_curve:
        target = Path(f"{stem}.residuals.png")
        save_residual_curve(residual_curve, target)
        written.append(target)
    if dictionary is not None:
        target = Path(f"{stem}.atoms.png")
        save_atom_grid(dictionary, target)
        written.append(target)
    if residual_hist:
        target = Path(f"{stem}.patch_residuals.png")
        save_histogram(residual_hist, target, "per-patch residual", "masked coding residuals")
        written.append(target)
    if deviations is not None and len(deviations):
        target = Path(f"{stem}.deviation.png")
        save_histogram(deviations, target, "distance to reference surface", "reference deviation")
        written.append(target)
    return written

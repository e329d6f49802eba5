"""Command-line front end: train, inpaint, denoise, fill-holes, info.

Exit codes: 0 success, 2 I/O or parse problems, 3 pipeline infeasibility,
4 mesh validation failures.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .config import build_config
from .errors import MeshParseError, MeshValidationError, PipelineError
from .holefill import detect_holes
from .meshio import load_mesh, save_mesh
from .pipeline import denoise_mesh, inpaint_mesh, train_dictionary, vertex_to_surface_rms
from .report import emit, format_report
from .sparse import load_dictionary, save_dictionary

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PIPELINE = 3
EXIT_VALIDATION = 4


def _on_off(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _add_config_flags(p, training=True, inpainting=True):
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--sigma", type=float, help="patch overlap factor")
    p.add_argument("--seeds", type=int, help="number of patch seeds (default |V|/8)")
    p.add_argument("--all-vertex-seeds", action="store_true", default=None,
                   help="seed a patch on every vertex")
    p.add_argument("--seed", type=int, dest="rng_seed", help="RNG seed (determinism)")
    p.add_argument("--threads", type=int, help="worker parallelism cap")
    if training:
        p.add_argument("--basis", choices=("gaussian", "cosine"), help="basis family")
        p.add_argument("--m-basis", type=int, dest="m_basis", help="basis functions (square)")
        p.add_argument("--atoms", type=int, dest="n_atoms", help="dictionary atoms")
        p.add_argument("--iters", type=int, dest="iterations", help="learning sweeps")
    p.add_argument("--sparsity", type=int, help="max non-zeros per sparse code")
    p.add_argument("--eps", type=float, help="coding residual tolerance")
    if inpainting:
        p.add_argument("--mode", choices=("direct", "adaptive"), help="inpainting mode")
        p.add_argument("--h", type=float, help="NLM filtering degree")
        p.add_argument("--nlm", type=_on_off, help="NLM blending on/off")
        p.add_argument("--nlm-squared", action="store_true", default=None,
                       dest="nlm_squared", help="square the code distance in NLM weights")
        p.add_argument("--fair-order", type=int, choices=(1, 2), dest="fair_order",
                       help="Laplacian order for fairing")
        p.add_argument("--large-hole-threshold", type=int, dest="large_hole_threshold",
                       help="fairing applies above this loop length")
        p.add_argument("--freeze-known", action="store_true", default=None,
                       dest="freeze_known", help="never move known vertices")
        p.add_argument("--reproject-codes", action="store_true", default=None,
                       dest="reproject_codes", help="re-run OMP on propagated codes")
        p.add_argument("--exclude-outer", action="store_true", default=None,
                       dest="exclude_outer", help="skip the longest boundary loop")
    p.add_argument("--report-json", metavar="PATH", dest="report_json",
                   help="write a JSON report plus figures alongside it")


_CONFIG_KEYS = ("sigma", "seeds", "all_vertex_seeds", "basis", "m_basis", "n_atoms",
                "sparsity", "eps", "iterations", "mode", "h", "nlm", "nlm_squared",
                "fair_order", "large_hole_threshold", "freeze_known", "reproject_codes",
                "fill_only", "exclude_outer", "rng_seed", "threads")


def _config_from(args):
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if hasattr(args, k)}
    return build_config(file_path=args.config, **overrides)


def make_parser():
    parser = argparse.ArgumentParser(
        prog="meshinpaint",
        description="Surface inpainting on triangle meshes via learned patch dictionaries.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn a dictionary from a mesh")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="dictionary file to write")
    _add_config_flags(p, inpainting=False)

    p = sub.add_parser("inpaint", help="fill holes and reconstruct their geometry")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="mesh file to write")
    p.add_argument("--dict", dest="dict_path", help="pre-trained dictionary file")
    p.add_argument("--fill-only", action="store_true", default=None, dest="fill_only",
                   help="hole triangulation and fairing only, no sparse coding")
    p.add_argument("--reference", help="ground-truth mesh for a deviation report")
    _add_config_flags(p)

    p = sub.add_parser("denoise", help="sparse-code and rebuild the whole surface")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="mesh file to write")
    _add_config_flags(p)

    p = sub.add_parser("fill-holes", help="geometry-only hole filling")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="mesh file to write")
    _add_config_flags(p, training=False)

    p = sub.add_parser("info", help="mesh statistics and validation")
    p.add_argument("input")
    return parser


def cmd_train(args):
    cfg = _config_from(args)
    mesh = load_mesh(args.input)
    dictionary, stats = train_dictionary(mesh, cfg)
    save_dictionary(dictionary, args.output)
    report = {"input": args.input, "output": args.output, **stats}
    print(format_report(report))
    emit(report, args.report_json, dictionary=dictionary,
         residual_curve=stats.get("residuals"))
    return EXIT_OK


def cmd_inpaint(args):
    cfg = _config_from(args)
    mesh = load_mesh(args.input)
    dictionary = load_dictionary(args.dict_path) if args.dict_path else None
    out_mesh, report = inpaint_mesh(mesh, cfg, dictionary=dictionary)
    save_mesh(out_mesh, args.output)
    report = {"input": args.input, "output": args.output, **report}
    deviations = None
    if args.reference:
        reference = load_mesh(args.reference)
        rms, deviations = vertex_to_surface_rms(out_mesh.vertices, reference)
        report["reference"] = args.reference
        report["reference_rms"] = rms
        report["reference_max"] = float(deviations.max())
    print(format_report(report))
    emit(report, args.report_json,
         residual_curve=report.get("training", {}).get("residuals"),
         residual_hist=report.get("patch_residuals"),
         deviations=deviations)
    return EXIT_OK


def cmd_denoise(args):
    cfg = _config_from(args)
    mesh = load_mesh(args.input)
    out_mesh, report = denoise_mesh(mesh, cfg)
    save_mesh(out_mesh, args.output)
    report = {"input": args.input, "output": args.output, **report}
    print(format_report(report))
    emit(report, args.report_json,
         residual_curve=report.get("training", {}).get("residuals"),
         residual_hist=report.get("patch_residuals"))
    return EXIT_OK


def cmd_fill(args):
    cfg = _config_from(args)
    cfg.fill_only = True
    mesh = load_mesh(args.input)
    out_mesh, report = inpaint_mesh(mesh, cfg)
    save_mesh(out_mesh, args.output)
    report = {"input": args.input, "output": args.output, **report}
    print(format_report(report))
    emit(report, args.report_json)
    return EXIT_OK


def cmd_info(args):
    mesh = load_mesh(args.input)
    loops = detect_holes(mesh)
    report = {
        "input": args.input,
        "vertices": mesh.n_vertices,
        "edges": mesh.n_edges,
        "faces": mesh.n_faces,
        "boundary_edges": mesh.n_boundary_edges,
        "euler_characteristic": mesh.euler_characteristic,
        "manifold_oriented": True,
        "holes": len(loops),
        "hole_lengths": [lp.length for lp in loops],
        "mean_edge_length": mesh.mean_edge_length(),
    }
    print(format_report(report))
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "inpaint": cmd_inpaint,
    "denoise": cmd_denoise,
    "fill-holes": cmd_fill,
    "info": cmd_info,
}


def main(argv=None):
    args = make_parser().parse_args(argv)
    np.seterr(all="ignore")
    try:
        return _COMMANDS[args.command](args)
    except MeshParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (OSError, ValueError) as exc:
        if isinstance(exc, MeshValidationError):
            print(f"validation error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())

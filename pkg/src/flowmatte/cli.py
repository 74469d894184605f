"""Batch command-line front end.

Four subcommands cover the pipeline: ``matte`` estimates an alpha matte
from an image and trimap, ``regularize`` smooths an external estimate,
``colors`` recovers the unmixed layer colors, and ``composite`` overlays a
matted foreground on a new background.  ``--report`` prints key=value lines
for scripting; ``--report-dir`` writes the same report plus diagnostic
figures into a directory.

Heavy imports happen inside the handlers so ``--threads`` can cap the
numeric libraries' worker pools before they start.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")


def _limit_threads(argv: list[str]):
    """Apply --threads before numpy loads its thread pools; once numpy is
    imported the setting cannot take effect and is ignored."""
    value = None
    for pos, arg in enumerate(argv):
        if arg == "--threads" and pos + 1 < len(argv):
            value = argv[pos + 1]
        elif arg.startswith("--threads="):
            value = arg.split("=", 1)[1]
    if value is None or not value.isdigit() or "numpy" in sys.modules:
        return
    for var in _THREAD_VARS:
        os.environ[var] = value


def _require_files(*paths):
    for path in paths:
        if path is not None and not os.path.isfile(path):
            raise OSError(f"input file not found: {path}")


def _resolve_params(args):
    import dataclasses

    from .core import Params
    params = Params()
    if args.config:
        params = Params.from_file(args.config, params)
    overrides = {}
    for field in dataclasses.fields(Params):
        value = getattr(args, field.name, None)
        if value is not None:
            overrides[field.name] = value
    return params.replace(**overrides) if overrides else params


def _param_entries(params) -> dict:
    import dataclasses
    return {field.name: getattr(params, field.name)
            for field in dataclasses.fields(params)}


def _emit_report(args, entries: dict, figures=None):
    from .diagnostics import report_lines, write_report
    if figures:
        for pos, path in enumerate(figures):
            entries[f"figure_{pos}"] = str(path)
    if args.report:
        print("\n".join(report_lines(entries)))
    if args.report_dir:
        from pathlib import Path
        directory = Path(args.report_dir)
        directory.mkdir(parents=True, exist_ok=True)
        write_report(directory / "report.txt", entries)


def _region_entries(prefix: str, trimap) -> dict:
    from .core import region_masks
    fg, bg, unk = region_masks(trimap)
    return {f"{prefix}_foreground": fg.size,
            f"{prefix}_background": bg.size,
            f"{prefix}_unknown": unk.size}


def _solve_entries(result, total_seconds: float) -> dict:
    entries = {
        "energy_path": "reduced" if result.used_reduced else "full",
    }
    if result.transparency is not None:
        entries["classifier_error"] = result.transparency.fit_error
        entries["classifier_use_reduced"] = int(result.transparency.use_e2)
    entries.update({
        "iterations": result.report.iterations,
        "relative_residual": result.report.relative_residual,
        "solve_seconds": result.report.wall_time,
    })
    for stage, seconds in result.timings.items():
        entries[f"{stage}_seconds"] = seconds
    entries["total_seconds"] = total_seconds
    return entries


def _cmd_matte(args) -> int:
    began = time.perf_counter()
    _require_files(args.image, args.trimap, args.config)
    from . import io
    from .diagnostics import render_matte_figures
    from .solver import run_pipeline

    params = _resolve_params(args)
    image = io.load_image(args.image)
    trimap = io.load_trimap(args.trimap)
    force = "full" if args.force_e1 else "reduced" if args.force_e2 else None
    result = run_pipeline(image, trimap, params, force=force,
                          trim=not args.no_trim)
    io.save_grayscale(args.matte, result.matte, args.bits)

    entries = {"command": "matte", "image": args.image, "trimap": args.trimap,
               "width": trimap.shape[1], "height": trimap.shape[0]}
    entries.update(_param_entries(params))
    entries["trim"] = int(not args.no_trim)
    entries.update(_region_entries("trimap", trimap))
    entries.update(_region_entries("trimmed", result.trimmed_trimap))
    entries.update(_solve_entries(result, time.perf_counter() - began))
    entries["matte"] = args.matte

    if args.dump_trimmed_trimap:
        io.save_grayscale(args.dump_trimmed_trimap,
                          io.labels_to_grayscale(result.trimmed_trimap),
                          args.bits)
        entries["trimmed_trimap"] = args.dump_trimmed_trimap
    if args.dump_ktou:
        if result.ktou is None:
            raise ValueError(
                "this run built no known-to-unknown flow; add --force-e1 "
                "to require one")
        import numpy as np

        from .core import FOREGROUND, UNKNOWN
        shape = trimap.shape
        estimate = (result.trimmed_trimap == FOREGROUND).astype(float).ravel()
        confidence = (result.trimmed_trimap != UNKNOWN).astype(float).ravel()
        estimate[result.ktou.pixels] = np.clip(result.ktou.fg_weight, 0.0, 1.0)
        confidence[result.ktou.pixels] = result.ktou.confidence
        est_path = args.dump_ktou + "_estimate.png"
        conf_path = args.dump_ktou + "_confidence.png"
        io.save_grayscale(est_path, estimate.reshape(shape), args.bits)
        io.save_grayscale(conf_path, confidence.reshape(shape), args.bits)
        entries["ktou_estimate"] = est_path
        entries["ktou_confidence"] = conf_path

    figures = None
    if args.report_dir:
        figures = render_matte_figures(args.report_dir, image, trimap,
                                       result.trimmed_trimap, result.matte,
                                       result.ktou)
    _emit_report(args, entries, figures)
    return 0


def _cmd_regularize(args) -> int:
    began = time.perf_counter()
    _require_files(args.image, args.trimap, args.estimate, args.loyalty,
                   args.config)
    from . import io
    from .diagnostics import render_regularize_figures
    from .solver import run_regularization

    params = _resolve_params(args)
    image = io.load_image(args.image)
    trimap = io.load_trimap(args.trimap)
    estimate = io.load_grayscale(args.estimate)
    loyalty = io.load_grayscale(args.loyalty)
    result = run_regularization(image, trimap, estimate, loyalty, params,
                                trim=not args.no_trim)
    io.save_grayscale(args.matte, result.matte, args.bits)

    entries = {"command": "regularize", "image": args.image,
               "trimap": args.trimap, "estimate": args.estimate,
               "loyalty": args.loyalty,
               "width": trimap.shape[1], "height": trimap.shape[0]}
    entries.update(_param_entries(params))
    entries["trim"] = int(not args.no_trim)
    entries.update(_region_entries("trimap", trimap))
    entries.update(_region_entries("trimmed", result.trimmed_trimap))
    entries.update(_solve_entries(result, time.perf_counter() - began))
    entries["matte"] = args.matte

    figures = None
    if args.report_dir:
        figures = render_regularize_figures(args.report_dir, image, estimate,
                                            loyalty, result.matte)
    _emit_report(args, entries, figures)
    return 0


def _cmd_colors(args) -> int:
    began = time.perf_counter()
    _require_files(args.image, args.alpha, args.config)
    from . import io
    from .colors import estimate_colors, snap_alpha
    from .diagnostics import render_color_figures

    params = _resolve_params(args)
    image = io.load_image(args.image)
    matte = io.load_grayscale(args.alpha)
    fg, bg, report = estimate_colors(image, matte, params)
    out_fg = fg * snap_alpha(matte)[..., None] if args.premultiplied else fg
    io.save_image(args.fg, out_fg, args.bits)
    io.save_image(args.bg, bg, args.bits)

    entries = {"command": "colors", "image": args.image, "alpha": args.alpha,
               "width": matte.shape[1], "height": matte.shape[0]}
    entries.update(_param_entries(params))
    entries.update({"premultiplied": int(args.premultiplied),
                    "iterations": report.iterations,
                    "relative_residual": report.relative_residual,
                    "solve_seconds": report.wall_time,
                    "total_seconds": time.perf_counter() - began,
                    "foreground": args.fg, "background": args.bg})

    figures = None
    if args.report_dir:
        figures = render_color_figures(args.report_dir, image, matte, fg, bg)
    _emit_report(args, entries, figures)
    return 0


def _cmd_composite(args) -> int:
    began = time.perf_counter()
    _require_files(args.fg, args.alpha, args.bg)
    from . import io
    from .colors import composite

    fg = io.load_image(args.fg)
    alpha = io.load_grayscale(args.alpha)
    bg = io.load_image(args.bg)
    io.save_image(args.output, composite(fg, alpha, bg), args.bits)

    entries = {"command": "composite", "fg": args.fg, "alpha": args.alpha,
               "bg": args.bg, "width": alpha.shape[1],
               "height": alpha.shape[0],
               "total_seconds": time.perf_counter() - began,
               "output": args.output}
    _emit_report(args, entries)
    return 0


def _add_run_flags(sub):
    sub.add_argument("--config", metavar="FILE",
                     help="read parameters from a key=value file")
    sub.add_argument("--report", action="store_true",
                     help="print key=value report lines to stdout")
    sub.add_argument("--report-dir", metavar="DIR",
                     help="write report.txt and diagnostic figures into DIR")
    sub.add_argument("--bits", type=int, choices=(8, 16), default=8,
                     help="output PNG bit depth (default 8)")
    sub.add_argument("--threads", type=int, metavar="N",
                     help="cap numeric worker threads (default: all cores)")


def _add_param_flags(sub):
    import dataclasses

    from .core import Params
    defaults = Params()
    group = sub.add_argument_group("parameter overrides")
    for field in dataclasses.fields(Params):
        kind = int if field.type == "int" else float
        group.add_argument("--" + field.name.replace("_", "-"), type=kind,
                           default=None, metavar="V",
                           help=f"default {getattr(defaults, field.name)}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowmatte",
        description="Natural image matting through inter-pixel information "
                    "flows: alpha estimation, matte regularization, layer "
                    "colors, and compositing.")
    commands = parser.add_subparsers(dest="subcommand", required=True)

    matte = commands.add_parser(
        "matte", help="estimate an alpha matte from an image and a trimap")
    matte.add_argument("image")
    matte.add_argument("trimap")
    matte.add_argument("matte", help="output matte PNG")
    path = matte.add_mutually_exclusive_group()
    path.add_argument("--force-e1", action="store_true",
                      help="always solve the full energy (with the "
                           "known-to-unknown term)")
    path.add_argument("--force-e2", action="store_true",
                      help="always solve the reduced energy (skip the "
                           "known-to-unknown term)")
    matte.add_argument("--no-trim", action="store_true",
                       help="skip both trimap trimming passes")
    matte.add_argument("--dump-trimmed-trimap", metavar="PATH",
                       help="also write the trimmed trimap as a PNG")
    matte.add_argument("--dump-ktou", metavar="PREFIX",
                       help="write the known-to-unknown alpha estimate and "
                            "its confidence as PREFIX_estimate.png and "
                            "PREFIX_confidence.png")
    _add_run_flags(matte)
    _add_param_flags(matte)
    matte.set_defaults(handler=_cmd_matte)

    regularize = commands.add_parser(
        "regularize",
        help="smooth an external alpha estimate against the flow energies")
    regularize.add_argument("image")
    regularize.add_argument("trimap")
    regularize.add_argument("estimate", help="external alpha estimate PNG")
    regularize.add_argument("loyalty",
                            help="grayscale confidence PNG in [0,1]")
    regularize.add_argument("matte", help="output matte PNG")
    regularize.add_argument("--no-trim", action="store_true",
                            help="skip both trimap trimming passes")
    _add_run_flags(regularize)
    _add_param_flags(regularize)
    regularize.set_defaults(handler=_cmd_regularize)

    colors = commands.add_parser(
        "colors", help="estimate unmixed layer colors from image plus matte")
    colors.add_argument("image")
    colors.add_argument("alpha", help="alpha matte PNG")
    colors.add_argument("fg", help="output foreground PNG")
    colors.add_argument("bg", help="output background PNG")
    colors.add_argument("--premultiplied", action="store_true",
                        help="write the foreground with premultiplied alpha")
    _add_run_flags(colors)
    _add_param_flags(colors)
    colors.set_defaults(handler=_cmd_colors)

    comp = commands.add_parser(
        "composite", help="overlay a matted foreground on a new background")
    comp.add_argument("fg")
    comp.add_argument("alpha")
    comp.add_argument("bg")
    comp.add_argument("output")
    _add_run_flags(comp)
    comp.set_defaults(handler=_cmd_composite)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _limit_threads(argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    from .core import MattingError
    try:
        return args.handler(args)
    except (MattingError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

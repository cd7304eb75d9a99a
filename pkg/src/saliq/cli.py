"""Command-line front end: quantize, overlap, sweep, report.

Exit codes: 0 success, 1 validation error (bad flags or config), 2 runtime
error (unreadable or malformed data files).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .analysis import (
    compute_scores,
    iou,
    output_error,
    reconstruction_error,
    run_sweep,
    write_overlap_csv,
    write_report_json,
    write_sweep_csv,
)
from .errors import ConfigValidationError, SaliqError, ShapeMismatchError
from .matrix_io import (
    DATA_AWARE_METHODS,
    DEFAULT_BITS,
    DEFAULT_BUDGETS,
    DEFAULT_CLIP_SIGMA,
    DEFAULT_DAMPING,
    DEFAULT_RANK,
    DEFAULT_SEED,
    METHODS,
    SweepConfig,
    load_calibration,
    load_matrix,
    parse_config,
)
from .quant import QuantConfig, quantize_residual, save_quantized
from .saliency import empty_mask, top_k_select
from .svgchart import line_chart

_DEFAULTS_NOTE = (
    "defaults: bits=%d, clip=%s, rank=%d, damping=%s, "
    "budgets=%s" % (DEFAULT_BITS, DEFAULT_CLIP_SIGMA, DEFAULT_RANK, DEFAULT_DAMPING,
                    ",".join(str(k) for k in DEFAULT_BUDGETS))
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; remap every usage problem (unknown flag,
    # missing value, bad int) to the validation exit code 1
    def error(self, message):
        raise _UsageError(message)


def _uint64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {value}")
    return value


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bits", type=int, default=DEFAULT_BITS, help="quantizer bit width")
    p.add_argument("--clip", type=float, default=DEFAULT_CLIP_SIGMA,
                   help="clipping multiplier in weight standard deviations")
    p.add_argument("--rank", type=int, default=DEFAULT_RANK, help="SVD rank for method 'svd'")
    p.add_argument("--damping", type=float, default=DEFAULT_DAMPING,
                   help="relative Hessian damping for method 'spqr'")
    p.add_argument("--seed", type=_uint64, default=DEFAULT_SEED, help="RNG seed (uint64)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="saliq", description=__doc__,
                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser(
        "quantize",
        help="quantize one layer with a chosen selection heuristic",
        epilog=_DEFAULTS_NOTE,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    q.add_argument("--weights", required=True, help="layer weights (.npy, float32 2-D)")
    q.add_argument("--method", required=True, choices=METHODS, help="selection heuristic")
    q.add_argument("--budget", type=int, required=True, help="protected entries per layer")
    q.add_argument("--calib", default=None, help="calibration batch (.npy), needed for awq/spqr")
    q.add_argument("--out", required=True, help="output directory for the quantized layer")
    _add_grid_flags(q)

    o = sub.add_parser(
        "overlap",
        help="IoU between the selections of two heuristics",
        epilog=_DEFAULTS_NOTE,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    o.add_argument("--weights", required=True, help="layer weights (.npy)")
    o.add_argument("--methods", required=True, help="two heuristics, comma separated (e.g. svd,spqr)")
    o.add_argument("--budget", type=int, required=True, help="protected entries per layer")
    o.add_argument("--calib", default=None, help="calibration batch (.npy)")
    o.add_argument("--out", default=None, help="optional path for overlap.csv")
    _add_grid_flags(o)

    s = sub.add_parser(
        "sweep",
        help="run the full (layer x method x budget) sweep from a JSON config",
        epilog=_DEFAULTS_NOTE,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    s.add_argument("--config", required=True, help="JSON sweep config")
    s.add_argument("--out", required=True, help="output directory for sweep.csv, overlap.csv, report.json")

    r = sub.add_parser(
        "report",
        help="render sweep.csv as an SVG chart plus a stdout summary table",
        epilog=_DEFAULTS_NOTE,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    r.add_argument("--input", required=True, help="sweep.csv produced by the sweep command")
    r.add_argument("--out", default=".", help="output directory for report.svg")
    return parser


def _single_layer_config(args, methods: tuple[str, ...]) -> SweepConfig:
    return SweepConfig(
        layers=(args.weights,),
        methods=methods,
        calibration=None,
        budgets=(max(args.budget, 1),),
        bits=args.bits,
        clip_sigma=args.clip,
        rank=args.rank,
        damping=args.damping,
        seed=args.seed,
    )


def _mask_for(args, method: str, w, calib):
    cfg = _single_layer_config(args, (method,))
    if method == "none":
        return empty_mask(w.name)
    scores = compute_scores(method, w, calib, cfg)
    return top_k_select(scores, args.budget)


def _load_inputs(args, methods):
    need_calib = any(m in DATA_AWARE_METHODS for m in methods)
    if need_calib and not args.calib:
        raise ConfigValidationError(
            [f"methods {sorted(set(methods) & set(DATA_AWARE_METHODS))} require --calib"]
        )
    w = load_matrix(args.weights)
    calib = load_calibration(args.calib, w.name, w.cols) if args.calib else None
    return w, calib


def cmd_quantize(args) -> int:
    _validate_grid_flags(args)
    w, calib = _load_inputs(args, (args.method,))
    mask = _mask_for(args, args.method, w, calib)
    q = quantize_residual(w, mask, QuantConfig(bits=args.bits, clip_sigma=args.clip))
    save_quantized(q, args.out)
    frob = reconstruction_error(w, q)
    print(
        f"layer={w.name} method={args.method} k={q.k} scale={q.scale:.6e} frob_rel={frob:.6e}"
    )
    return 0


def cmd_overlap(args) -> int:
    _validate_grid_flags(args)
    names = tuple(m.strip() for m in args.methods.split(","))
    if len(names) != 2 or any(m not in METHODS or m == "none" for m in names):
        raise ConfigValidationError(
            [f"--methods must name two selecting heuristics from "
             f"{[m for m in METHODS if m != 'none']}, got {args.methods!r}"]
        )
    w, calib = _load_inputs(args, names)
    mask_a = _mask_for(args, names[0], w, calib)
    mask_b = _mask_for(args, names[1], w, calib)
    value = iou(mask_a, mask_b)
    print("layer,method_a,method_b,k,iou")
    print(f"{w.name},{names[0]},{names[1]},{args.budget},{value:.6e}")
    if args.out:
        Path(args.out).write_bytes(
            (
                "layer,method_a,method_b,k,iou\n"
                f"{w.name},{names[0]},{names[1]},{args.budget},{value:.6e}\n"
            ).encode("utf-8")
        )
    return 0


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    report = run_sweep(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(report, out / "sweep.csv")
    write_overlap_csv(report, out / "overlap.csv")
    write_report_json(report, out / "report.json")
    print(
        f"wrote {len(report.records)} cells and {len(report.overlaps)} overlaps to {out}"
    )
    return 0


def _read_sweep_csv(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SaliqError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows or rows[0] != ["layer", "method", "k", "frob_rel", "out_rel", "wall_ms"]:
        raise SaliqError(f"{path}: not a sweep.csv (bad or missing header)")
    if len(rows) < 2:
        raise SaliqError(f"{path}: no data rows")
    parsed = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 6:
            raise SaliqError(f"{path}: line {i}: expected 6 fields, got {len(row)}")
        try:
            parsed.append((row[0], row[1], int(row[2]), float(row[3])))
        except ValueError as exc:
            raise SaliqError(f"{path}: line {i}: {exc}") from exc
    return parsed


def cmd_report(args) -> int:
    rows = _read_sweep_csv(args.input)
    # mean frob_rel per (method, budget) across layers, methods in first-seen order
    sums: dict[tuple[str, int], list[float]] = {}
    methods: list[str] = []
    for layer, method, k, frob in rows:
        if method not in methods:
            methods.append(method)
        sums.setdefault((method, k), []).append(frob)
    series = {
        m: [(k, sum(v) / len(v)) for (mm, k), v in sorted(sums.items()) if mm == m]
        for m in methods
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    svg_path = out / "report.svg"
    svg_path.write_text(line_chart(series), encoding="utf-8")
    print(f"{'method':<10} {'k':>6} {'mean frob_rel':>14}")
    for m in methods:
        for k, v in series[m]:
            print(f"{m:<10} {k:>6} {v:>14.6e}")
    print(f"wrote {svg_path}")
    return 0


def _validate_grid_flags(args) -> None:
    bad = []
    if not 2 <= args.bits <= 8:
        bad.append(f"--bits must be in [2, 8], got {args.bits}")
    if not args.clip > 0:
        bad.append(f"--clip must be > 0, got {args.clip}")
    if args.rank < 1:
        bad.append(f"--rank must be >= 1, got {args.rank}")
    if not args.damping > 0:
        bad.append(f"--damping must be > 0, got {args.damping}")
    if getattr(args, "budget", 0) < 0:
        bad.append(f"--budget must be >= 0, got {args.budget}")
    if bad:
        raise ConfigValidationError(bad)


_HANDLERS = {
    "quantize": cmd_quantize,
    "overlap": cmd_overlap,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"saliq: error: {exc}", file=sys.stderr)
        return 1
    try:
        return _HANDLERS[args.command](args)
    except (ConfigValidationError, ShapeMismatchError) as exc:
        print(f"saliq: validation error: {exc}", file=sys.stderr)
        return 1
    except (SaliqError, OSError) as exc:
        print(f"saliq: error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    raise SystemExit(main())

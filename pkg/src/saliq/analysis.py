"""Selection overlap, error metrics, brute-force oracle, and budget sweeps.

Error metrics are desk-scale proxies: frob_rel is the relative Frobenius
reconstruction error and out_rel the relative error of the layer output on a
calibration batch. Degenerate denominators are reported as inf rather than
silently zeroed. Sweeps are deterministic: the only randomness is the seeded
random scorer, rows are emitted in canonical (layer, method, budget) order
regardless of evaluation order, and the CSV wall_ms column is kept at zero so
repeated runs diff clean (measured timings live in report.json).
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeMismatchError, SweepCellError
from .matrix_io import (
    CalibrationBatch,
    SweepConfig,
    WeightMatrix,
    load_calibration,
    load_matrix,
)
from .quant import QuantConfig, QuantizedLayer, quantize_unprotected, quantize_residual, reconstruct
from .saliency import (
    HessianInfo,
    ScoreMatrix,
    SelectionMask,
    empty_mask,
    hessian_info,
    score_awq,
    score_random,
    score_spqr,
    score_svd,
    top_k_select,
)


def iou(a: SelectionMask, b: SelectionMask) -> float:
    """Intersection over union of two selections; 1.0 when both are empty."""
    if a.layer != b.layer:
        raise ShapeMismatchError(
            f"cannot compare masks for different layers '{a.layer}' and '{b.layer}'"
        )
    pa, pb = a.pairs(), b.pairs()
    union = len(pa | pb)
    if union == 0:
        return 1.0
    return len(pa & pb) / union


def _relative(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den


def reconstruction_error(w: WeightMatrix, q: QuantizedLayer) -> float:
    """Relative Frobenius error ||W - What||_F / ||W||_F."""
    if q.codes.shape != w.values.shape:
        raise ShapeMismatchError(
            f"quantized shape {q.codes.shape} does not match layer shape {w.values.shape}"
        )
    ref = w.values.astype(np.float64)
    diff = ref - reconstruct(q)
    return _relative(float(np.linalg.norm(diff)), float(np.linalg.norm(ref)))


def output_error(w: WeightMatrix, q: QuantizedLayer, x: CalibrationBatch) -> float:
    """Relative output error ||X W^T - X What^T||_F / ||X W^T||_F."""
    if x.features != w.cols:
        raise ShapeMismatchError(
            f"calibration has {x.features} features, layer '{w.name}' has {w.cols} columns"
        )
    if q.codes.shape != w.values.shape:
        raise ShapeMismatchError(
            f"quantized shape {q.codes.shape} does not match layer shape {w.values.shape}"
        )
    xv = x.values.astype(np.float64)
    ref = xv @ w.values.astype(np.float64).T
    approx = xv @ reconstruct(q).T
    den = float(np.linalg.norm(ref))
    if den == 0.0:
        # zero reference output: the metric is undefined, flag it
        return float("inf")
    return float(np.linalg.norm(ref - approx)) / den


def oracle_select(w: WeightMatrix, cfg: QuantConfig, k: int) -> SelectionMask:
    """Brute-force reference: protect the k entries with the largest per-element
    quantization error on the unprotected grid.

    At a fixed grid the total squared error is the sum of per-entry errors, so
    this greedy choice is optimal among all k-subsets.
    """
    baseline = quantize_unprotected(w, cfg)
    per_entry = np.abs(w.values.astype(np.float64) - reconstruct(baseline))
    scores = ScoreMatrix(layer=w.name, method="oracle", scores=per_entry)
    return top_k_select(scores, k)


@dataclass(frozen=True)
class ErrorRecord:
    layer: str
    method: str
    k: int
    frob_rel: float
    out_rel: float | None
    wall_ms: float


@dataclass(frozen=True)
class OverlapRecord:
    layer: str
    method_a: str
    method_b: str
    k: int
    iou: float


@dataclass(frozen=True)
class SweepReport:
    config: SweepConfig
    records: tuple[ErrorRecord, ...]
    overlaps: tuple[OverlapRecord, ...]


def synthetic_outlier_layer(
    dim: int,
    seed: int,
    samples: int = 128,
    name: str | None = None,
) -> tuple[WeightMatrix, CalibrationBatch]:
    """Gaussian layer with planted outliers for benchmarking selections.

    dim // 32 input columns are marked as outlier columns; within each,
    dim // 8 entries are scaled by 10x. The calibration batch scales those
    same columns by 5x, so activation outliers and structural outliers
    partially overlap.
    """
    rng = np.random.default_rng([seed, 0x5A11])
    w = rng.standard_normal((dim, dim))
    n_cols = max(1, dim // 32)
    per_col = max(1, dim // 8)
    outlier_cols = rng.choice(dim, size=n_cols, replace=False)
    for col in outlier_cols:
        hot_rows = rng.choice(dim, size=per_col, replace=False)
        w[hot_rows, col] *= 10.0
    x = rng.standard_normal((samples, dim))
    x[:, outlier_cols] *= 5.0
    layer_name = name if name is not None else f"synth{seed:04d}"
    return (
        WeightMatrix(name=layer_name, values=w.astype(np.float32)),
        CalibrationBatch(layer=layer_name, values=x.astype(np.float32)),
    )


def compute_scores(
    method: str,
    w: WeightMatrix,
    calib: CalibrationBatch | None,
    cfg: SweepConfig,
    hessian: HessianInfo | None = None,
) -> ScoreMatrix | None:
    """Dispatch one scoring heuristic; returns None for the unprotected baseline."""
    if method == "none":
        return None
    if method == "random":
        return score_random(w, cfg.seed)
    if method == "svd":
        return score_svd(w, cfg.rank, seed=cfg.seed)
    if calib is None:
        raise ShapeMismatchError(f"method '{method}' needs calibration for layer '{w.name}'")
    if method == "awq":
        return score_awq(w, calib)
    if method == "spqr":
        h = hessian if hessian is not None else hessian_info(calib, cfg.damping)
        return score_spqr(w, h)
    raise ValueError(f"unknown method '{method}'")


def run_sweep(cfg: SweepConfig, cell_order: list[int] | None = None) -> SweepReport:
    """Score, select, quantize, and measure every (layer, method, budget) cell.

    Cells are independent; `cell_order` (a permutation of cell positions)
    changes only the evaluation order, never the report contents apart from
    the measured wall_ms values.
    """
    layers = [load_matrix(p) for p in cfg.layers]
    calibs: list[CalibrationBatch | None] = []
    for i, w in enumerate(layers):
        ref = cfg.calibration[i] if cfg.calibration is not None else None
        calibs.append(load_calibration(ref, w.name, w.cols) if ref else None)

    qcfg = QuantConfig(bits=cfg.bits, clip_sigma=cfg.clip_sigma)

    masks: dict[tuple[int, str, int], SelectionMask] = {}
    scores: dict[tuple[int, str], ScoreMatrix | None] = {}
    for li, w in enumerate(layers):
        hess = None
        if "spqr" in cfg.methods and calibs[li] is not None:
            hess = hessian_info(calibs[li], cfg.damping)
        for method in cfg.methods:
            try:
                scores[(li, method)] = compute_scores(method, w, calibs[li], cfg, hessian=hess)
            except Exception as exc:
                raise SweepCellError(
                    f"layer='{w.name}' method='{method}': scoring failed: {exc}"
                ) from exc
            for k in cfg.budgets:
                sm = scores[(li, method)]
                masks[(li, method, k)] = (
                    empty_mask(w.name) if sm is None else top_k_select(sm, k)
                )

    cells = [
        (li, method, k)
        for li in range(len(layers))
        for method in cfg.methods
        for k in cfg.budgets
    ]
    order = cell_order if cell_order is not None else list(range(len(cells)))
    if sorted(order) != list(range(len(cells))):
        raise ValueError("cell_order must be a permutation of the cell positions")

    results: dict[tuple[int, str, int], ErrorRecord] = {}
    for pos in order:
        li, method, k = cells[pos]
        w = layers[li]
        try:
            start = time.perf_counter()
            q = quantize_residual(w, masks[(li, method, k)], qcfg)
            frob = reconstruction_error(w, q)
            out = output_error(w, q, calibs[li]) if calibs[li] is not None else None
            wall = (time.perf_counter() - start) * 1000.0
        except Exception as exc:
            raise SweepCellError(
                f"layer='{w.name}' method='{method}' k={k}: {exc}"
            ) from exc
        results[(li, method, k)] = ErrorRecord(
            layer=w.name, method=method, k=k, frob_rel=frob, out_rel=out, wall_ms=wall
        )

    records = tuple(results[c] for c in cells)

    selecting = [m for m in cfg.methods if m != "none"]
    overlaps = []
    for li, w in enumerate(layers):
        for ma, mb in itertools.combinations(selecting, 2):
            for k in cfg.budgets:
                overlaps.append(
                    OverlapRecord(
                        layer=w.name,
                        method_a=ma,
                        method_b=mb,
                        k=k,
                        iou=iou(masks[(li, ma, k)], masks[(li, mb, k)]),
                    )
                )
    return SweepReport(config=cfg, records=records, overlaps=tuple(overlaps))


def write_sweep_csv(report: SweepReport, path) -> None:
    """sweep.csv: one row per cell, %.6e numerics, LF endings.

    The wall_ms column is pinned to zero so byte-level diffs only reflect
    results; measured timings are in report.json.
    """
    lines = ["layer,method,k,frob_rel,out_rel,wall_ms"]
    for r in report.records:
        out_rel = "" if r.out_rel is None else f"{r.out_rel:.6e}"
        lines.append(f"{r.layer},{r.method},{r.k},{r.frob_rel:.6e},{out_rel},{0.0:.6e}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def write_overlap_csv(report: SweepReport, path) -> None:
    lines = ["layer,method_a,method_b,k,iou"]
    for r in report.overlaps:
        lines.append(f"{r.layer},{r.method_a},{r.method_b},{r.k},{r.iou:.6e}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def write_report_json(report: SweepReport, path) -> None:
    """Full report including the config snapshot and measured per-cell wall_ms."""
    doc = {
        "config": asdict(report.config),
        "records": [asdict(r) for r in report.records],
        "overlaps": [asdict(r) for r in report.overlaps],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

"""Symmetric low-bit quantization of the non-salient residual.

A layer decomposes into a sparse full-precision component (the protected
entries, kept bit-exact) plus a dense quantized residual. The residual is
built by zeroing the protected entries of the weights, clipping to
+/- (clip_sigma * population std of the weights), and rounding onto the
symmetric integer grid [-(2^(b-1)-1), +(2^(b-1)-1)] at per-tensor scale
max(|clipped residual|) / (2^(b-1)-1). Dequantization arithmetic is carried
out in double precision so the half-step error bound holds exactly at the
stored scale; protected entries always reconstruct to their original float32
bits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigValidationError, FormatError, MaskIndexError
from .matrix_io import WeightMatrix, read_npy, write_npy
from .saliency import SelectionMask, empty_mask


@dataclass(frozen=True)
class QuantConfig:
    """Bit width and clipping multiplier (in units of weight standard deviations)."""

    bits: int = 4
    clip_sigma: float = 2.5

    def __post_init__(self):
        bad = []
        if not isinstance(self.bits, int) or isinstance(self.bits, bool) or not 2 <= self.bits <= 8:
            bad.append(f"bits must be an integer in [2, 8], got {self.bits!r}")
        if not self.clip_sigma > 0:
            bad.append(f"clip_sigma must be > 0, got {self.clip_sigma!r}")
        if bad:
            raise ConfigValidationError(bad)

    @property
    def code_max(self) -> int:
        """Largest integer code; the grid is symmetric, -2^(b-1) is never used."""
        return 2 ** (self.bits - 1) - 1


@dataclass(frozen=True)
class QuantizedLayer:
    """Sparse salient map plus dense integer codes with one per-tensor scale.

    Codes at protected indices are 0; scale is 1.0 by convention when the
    clipped residual is entirely zero.
    """

    layer: str
    method: str
    k: int
    codes: np.ndarray
    scale: float
    salient: dict[tuple[int, int], float]
    config: QuantConfig

    @property
    def rows(self) -> int:
        return self.codes.shape[0]

    @property
    def cols(self) -> int:
        return self.codes.shape[1]


def clip_threshold(w: WeightMatrix, clip_sigma: float) -> float:
    """clip_sigma times the population standard deviation of all entries."""
    return float(clip_sigma) * float(w.values.astype(np.float64).std())


def _round_away(x: np.ndarray) -> np.ndarray:
    # round-half-away-from-zero, fixed for cross-platform determinism
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_residual(
    w: WeightMatrix,
    mask: SelectionMask,
    cfg: QuantConfig,
    scale: float | None = None,
) -> QuantizedLayer:
    """Quantize the weights outside the mask; keep masked entries exact.

    Passing `scale` pins the grid instead of deriving it from the clipped
    residual, which is how fixed-grid comparisons across masks are made.
    """
    idx = mask.indices
    if len(idx):
        out_r = (idx[:, 0] < 0) | (idx[:, 0] >= w.rows)
        out_c = (idx[:, 1] < 0) | (idx[:, 1] >= w.cols)
        bad = out_r | out_c
        if bad.any():
            r, c = idx[bad][0]
            raise MaskIndexError(
                f"mask index ({r}, {c}) outside {w.rows}x{w.cols} layer '{w.name}'"
            )

    salient = {(int(r), int(c)): float(w.values[r, c]) for r, c in idx}
    residual = w.values.astype(np.float64)
    if len(idx):
        residual[idx[:, 0], idx[:, 1]] = 0.0

    threshold = clip_threshold(w, cfg.clip_sigma)
    np.clip(residual, -threshold, threshold, out=residual)

    if scale is None:
        peak = float(np.abs(residual).max())
        scale = peak / cfg.code_max if peak > 0 else 1.0
    elif not scale > 0:
        raise ConfigValidationError([f"fixed scale must be > 0, got {scale!r}"])

    codes = _round_away(residual / scale)
    np.clip(codes, -cfg.code_max, cfg.code_max, out=codes)
    return QuantizedLayer(
        layer=w.name,
        method=mask.method,
        k=mask.k,
        codes=codes.astype(np.int8),
        scale=float(scale),
        salient=salient,
        config=cfg,
    )


def quantize_unprotected(w: WeightMatrix, cfg: QuantConfig) -> QuantizedLayer:
    """Baseline with an empty mask: every entry goes through the grid."""
    return quantize_residual(w, empty_mask(w.name), cfg)


def reconstruct(q: QuantizedLayer) -> np.ndarray:
    """Dequantize: codes times scale, with protected entries placed exactly.

    Returns float64 so the grid arithmetic is exact at the stored scale;
    protected float32 values embed without change.
    """
    out = q.codes.astype(np.float64) * q.scale
    if q.salient:
        rows, cols, vals = zip(*((r, c, v) for (r, c), v in q.salient.items()))
        out[list(rows), list(cols)] = vals
    return out


def save_quantized(q: QuantizedLayer, directory) -> None:
    """Write codes.npy (int8), salient.npy (float32 rows: row, col, value), meta.json."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_npy(out / "codes.npy", q.codes)
    triples = np.array(
        [(r, c, v) for (r, c), v in sorted(q.salient.items())], dtype=np.float32
    ).reshape(-1, 3)
    write_npy(out / "salient.npy", triples)
    meta = {
        "layer": q.layer,
        "method": q.method,
        "k": q.k,
        "scale": q.scale,
        "bits": q.config.bits,
        "clip_sigma": q.config.clip_sigma,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_quantized(directory) -> QuantizedLayer:
    src = Path(directory)
    codes = read_npy(src / "codes.npy", "|i1")
    triples = read_npy(src / "salient.npy", "<f4")
    if triples.shape[1] != 3:
        raise FormatError(f"{src / 'salient.npy'}: expected 3 columns, got {triples.shape[1]}")
    meta = json.loads((src / "meta.json").read_text(encoding="utf-8"))
    salient = {(int(r), int(c)): float(v) for r, c, v in triples}
    return QuantizedLayer(
        layer=meta["layer"],
        method=meta["method"],
        k=int(meta["k"]),
        codes=codes,
        scale=float(meta["scale"]),
        salient=salient,
        config=QuantConfig(bits=int(meta["bits"]), clip_sigma=float(meta["clip_sigma"])),
    )

"""Bit-exact matrix I/O and sweep configuration.

Weight matrices and calibration batches travel as NPY v1.0 files: the 6-byte
magic, version bytes 0x01 0x00, a little-endian uint16 header length, and an
ASCII header dict padded with spaces to 64-byte alignment and terminated by a
newline. Weights and activations must be 2-D little-endian float32 in C order;
anything else is rejected, never converted.
"""

from __future__ import annotations

import ast
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigValidationError,
    DataIntegrityError,
    FormatError,
    ShapeMismatchError,
    UnsupportedLayoutError,
)

MAGIC = b"\x93NUMPY"
HEADER_ALIGN = 64

# Only descrs the toolkit ever writes: float32 payloads, int8 code matrices,
# int64 index pairs.
KNOWN_DESCRS = {"<f4": np.dtype("<f4"), "|i1": np.dtype("|i1"), "<i8": np.dtype("<i8")}

METHODS = ("random", "awq", "spqr", "svd", "none")
DATA_AWARE_METHODS = ("awq", "spqr")

DEFAULT_BITS = 4
DEFAULT_CLIP_SIGMA = 2.5
DEFAULT_RANK = 8
DEFAULT_DAMPING = 0.01
DEFAULT_BUDGETS = (1, 16, 64, 256, 1024, 4096)
DEFAULT_SEED = 0


def read_npy(path, descr: str) -> np.ndarray:
    """Read a strict NPY v1.0 file holding a 2-D array of the given descr.

    Raises FormatError for malformed containers (naming the offending field),
    UnsupportedLayoutError for any dtype/order/rank other than the one asked for.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 10:
        raise FormatError(f"{path}: truncated file, no room for magic and header length")
    if raw[:6] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:6]!r}, expected {MAGIC!r}")
    if raw[6:8] != b"\x01\x00":
        raise FormatError(
            f"{path}: unsupported format version {raw[6]}.{raw[7]}, only 1.0 is accepted"
        )
    header_len = int.from_bytes(raw[8:10], "little")
    if len(raw) < 10 + header_len:
        raise FormatError(f"{path}: header length field says {header_len}, file is shorter")
    header_bytes = raw[10 : 10 + header_len]
    if not header_bytes.endswith(b"\n"):
        raise FormatError(f"{path}: header is not newline-terminated")
    try:
        header = ast.literal_eval(header_bytes.decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"{path}: header is not a Python dict literal: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header evaluates to {type(header).__name__}, not dict")
    missing = {"descr", "fortran_order", "shape"} - header.keys()
    extra = header.keys() - {"descr", "fortran_order", "shape"}
    if missing:
        raise FormatError(f"{path}: header missing field(s) {sorted(missing)}")
    if extra:
        raise FormatError(f"{path}: header has unknown field(s) {sorted(extra)}")

    file_descr = header["descr"]
    if not isinstance(file_descr, str):
        raise FormatError(f"{path}: header field 'descr' is not a string")
    if header["fortran_order"] is not False:
        raise UnsupportedLayoutError(
            f"{path}: fortran_order={header['fortran_order']!r}, only C order is supported"
        )
    shape = header["shape"]
    if not (isinstance(shape, tuple) and all(isinstance(n, int) and n >= 0 for n in shape)):
        raise FormatError(f"{path}: header field 'shape' {shape!r} is not a tuple of sizes")
    if len(shape) != 2:
        raise UnsupportedLayoutError(f"{path}: expected a 2-D array, shape is {shape}")
    if file_descr != descr:
        raise UnsupportedLayoutError(f"{path}: dtype descr {file_descr!r}, expected {descr!r}")

    dtype = KNOWN_DESCRS[descr]
    payload = raw[10 + header_len :]
    expected = shape[0] * shape[1] * dtype.itemsize
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, shape {shape} needs {expected}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def write_npy(path, array: np.ndarray) -> None:
    """Write a 2-D array as a strict NPY v1.0 file (64-byte aligned header)."""
    descr = array.dtype.str
    if descr not in KNOWN_DESCRS:
        raise UnsupportedLayoutError(f"refusing to write dtype {array.dtype}, descr {descr!r}")
    if array.ndim != 2:
        raise UnsupportedLayoutError(f"refusing to write {array.ndim}-D array")
    header = "{'descr': '%s', 'fortran_order': False, 'shape': (%d, %d), }" % (
        descr,
        array.shape[0],
        array.shape[1],
    )
    pad = HEADER_ALIGN - ((len(MAGIC) + 4 + len(header) + 1) % HEADER_ALIGN)
    pad %= HEADER_ALIGN
    header_bytes = (header + " " * pad + "\n").encode("latin1")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(b"\x01\x00")
        fh.write(len(header_bytes).to_bytes(2, "little"))
        fh.write(header_bytes)
        fh.write(np.ascontiguousarray(array).tobytes("C"))


@dataclass(frozen=True)
class WeightMatrix:
    """Dense float32 weight matrix for one linear layer, row-major."""

    name: str
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise UnsupportedLayoutError(
                f"layer '{self.name}': weights must be 2-D and non-empty, got shape {v.shape}"
            )
        if not np.isfinite(v).all():
            raise DataIntegrityError(f"layer '{self.name}': weights contain NaN or Inf")
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CalibrationBatch:
    """Float32 activation matrix (samples x features) feeding one layer."""

    layer: str
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise UnsupportedLayoutError(
                f"calibration for '{self.layer}': must be 2-D and non-empty, got shape {v.shape}"
            )
        if not np.isfinite(v).all():
            raise DataIntegrityError(f"calibration for '{self.layer}': contains NaN or Inf")
        object.__setattr__(self, "values", v)

    @property
    def samples(self) -> int:
        return self.values.shape[0]

    @property
    def features(self) -> int:
        return self.values.shape[1]


def load_matrix(path) -> WeightMatrix:
    """Load a weight matrix with exact bit-level values; name is the file stem."""
    values = read_npy(path, "<f4")
    if values.shape[0] < 1 or values.shape[1] < 1:
        raise UnsupportedLayoutError(f"{path}: weight matrix has an empty dimension {values.shape}")
    name = Path(path).stem
    return WeightMatrix(name=name, values=values)


def save_matrix(matrix: WeightMatrix, path) -> None:
    """Write a weight matrix; load_matrix(path) reproduces every payload byte."""
    # WeightMatrix enforces finiteness on construction; re-check in case the
    # caller mutated the buffer afterwards, and do it before touching the file.
    if not np.isfinite(matrix.values).all():
        raise DataIntegrityError(f"layer '{matrix.name}': refusing to save NaN/Inf values")
    write_npy(path, matrix.values)


def load_calibration(path, layer: str, expected_features: int | None = None) -> CalibrationBatch:
    """Load a calibration batch for the named layer.

    When expected_features is given (the layer's input width), a mismatching
    column count raises ShapeMismatchError citing both values.
    """
    values = read_npy(path, "<f4")
    if expected_features is not None and values.shape[1] != expected_features:
        raise ShapeMismatchError(
            f"{path}: calibration has {values.shape[1]} features, "
            f"layer '{layer}' expects {expected_features}"
        )
    return CalibrationBatch(layer=layer, values=values)


def save_calibration(batch: CalibrationBatch, path) -> None:
    if not np.isfinite(batch.values).all():
        raise DataIntegrityError(f"calibration '{batch.layer}': refusing to save NaN/Inf values")
    write_npy(path, batch.values)


def calibration_path_for(weight_path) -> Path:
    """Conventional sibling calibration file: <stem>.calib.npy next to <stem>.npy."""
    p = Path(weight_path)
    return p.with_name(p.stem + ".calib.npy")


def discover_layers(directory) -> list[tuple[Path, Path | None]]:
    """Scan a flat layer directory for weight files and their optional calibration siblings.

    Returns (weight_path, calib_path_or_None) pairs sorted by filename.
    """
    root = Path(directory)
    pairs = []
    for p in sorted(root.glob("*.npy")):
        if p.name.endswith(".calib.npy"):
            continue
        calib = calibration_path_for(p)
        pairs.append((p, calib if calib.exists() else None))
    return pairs


@dataclass(frozen=True)
class SweepConfig:
    """Validated sweep configuration with defaults applied."""

    layers: tuple[str, ...]
    methods: tuple[str, ...]
    calibration: tuple[str | None, ...] | None = None
    budgets: tuple[int, ...] = DEFAULT_BUDGETS
    bits: int = DEFAULT_BITS
    clip_sigma: float = DEFAULT_CLIP_SIGMA
    rank: int = DEFAULT_RANK
    damping: float = DEFAULT_DAMPING
    seed: int = DEFAULT_SEED


_CONFIG_KEYS = {
    "layers",
    "calibration",
    "methods",
    "budgets",
    "bits",
    "clip_sigma",
    "rank",
    "damping",
    "seed",
}


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def parse_config(path) -> SweepConfig:
    """Parse and validate a JSON sweep config, collecting every violation.

    Defaults when absent: bits=4, clip_sigma=2.5, rank=8, damping=0.01,
    budgets=(1, 16, 64, 256, 1024, 4096), seed=0. Entries in `layers` may be
    directories; they expand to every weight .npy inside, and calibration
    files are discovered from `<name>.calib.npy` siblings unless an explicit
    `calibration` list is given.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise FormatError(f"{path}: cannot parse config: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: config root must be a JSON object")

    bad: list[str] = []
    for key in sorted(doc.keys() - _CONFIG_KEYS):
        bad.append(f"unknown field '{key}'")

    layers_raw = doc.get("layers")
    layers: list[str] = []
    calib: list[str | None] = []
    had_dirs = False
    if not isinstance(layers_raw, list) or not layers_raw:
        bad.append("'layers' must be a non-empty list of file or directory paths")
    else:
        for entry in layers_raw:
            if not isinstance(entry, str):
                bad.append(f"'layers' entry {entry!r} is not a path string")
                continue
            if os.path.isdir(entry):
                had_dirs = True
                for wpath, cpath in discover_layers(entry):
                    layers.append(str(wpath))
                    calib.append(str(cpath) if cpath is not None else None)
            else:
                layers.append(entry)
                sibling = calibration_path_for(entry)
                calib.append(str(sibling) if sibling.exists() else None)
        if not layers:
            bad.append("'layers' resolved to zero weight files")

    calib_raw = doc.get("calibration")
    if calib_raw is not None:
        if had_dirs:
            bad.append("explicit 'calibration' list cannot be combined with directory entries")
        elif not isinstance(calib_raw, list) or len(calib_raw) != len(layers):
            bad.append(
                f"'calibration' must be a list matching 'layers' "
                f"({len(layers)} entries), got {calib_raw!r}"
            )
        elif not all(c is None or isinstance(c, str) for c in calib_raw):
            bad.append("'calibration' entries must be path strings or null")
        else:
            calib = list(calib_raw)

    methods_raw = doc.get("methods")
    methods: list[str] = []
    if not isinstance(methods_raw, list) or not methods_raw:
        bad.append(f"'methods' must be a non-empty list drawn from {list(METHODS)}")
    else:
        for m in methods_raw:
            if m not in METHODS:
                bad.append(f"unknown method '{m}' (valid: {list(METHODS)})")
            elif m in methods:
                bad.append(f"duplicate method '{m}'")
            else:
                methods.append(m)

    budgets_raw = doc.get("budgets", list(DEFAULT_BUDGETS))
    budgets: list[int] = []
    if not isinstance(budgets_raw, list) or not budgets_raw:
        bad.append("'budgets' must be a non-empty list of integers")
    elif not all(_is_int(k) for k in budgets_raw):
        bad.append(f"'budgets' entries must be integers, got {budgets_raw!r}")
    else:
        if any(k < 0 for k in budgets_raw):
            bad.append(f"'budgets' entries must be >= 0, got {budgets_raw!r}")
        if any(b <= a for a, b in zip(budgets_raw, budgets_raw[1:])):
            bad.append(f"'budgets' must be strictly increasing, got {budgets_raw!r}")
        budgets = list(budgets_raw)

    bits = doc.get("bits", DEFAULT_BITS)
    if not _is_int(bits) or not 2 <= bits <= 8:
        bad.append(f"'bits' must be an integer in [2, 8], got {bits!r}")
    clip_sigma = doc.get("clip_sigma", DEFAULT_CLIP_SIGMA)
    if not isinstance(clip_sigma, (int, float)) or isinstance(clip_sigma, bool) or clip_sigma <= 0:
        bad.append(f"'clip_sigma' must be > 0, got {clip_sigma!r}")
    rank = doc.get("rank", DEFAULT_RANK)
    if not _is_int(rank) or rank < 1:
        bad.append(f"'rank' must be an integer >= 1, got {rank!r}")
    damping = doc.get("damping", DEFAULT_DAMPING)
    if not isinstance(damping, (int, float)) or isinstance(damping, bool) or damping <= 0:
        bad.append(f"'damping' must be > 0, got {damping!r}")
    seed = doc.get("seed", DEFAULT_SEED)
    if not _is_int(seed) or not 0 <= seed < 2**64:
        bad.append(f"'seed' must be an unsigned 64-bit integer, got {seed!r}")

    data_aware = [m for m in methods if m in DATA_AWARE_METHODS]
    if data_aware and layers:
        uncovered = [layers[i] for i, c in enumerate(calib) if c is None]
        if uncovered:
            bad.append(
                f"methods {data_aware} need calibration, but none was found for {uncovered}"
            )

    if bad:
        raise ConfigValidationError(bad)

    has_calib = any(c is not None for c in calib)
    return SweepConfig(
        layers=tuple(layers),
        methods=tuple(methods),
        calibration=tuple(calib) if has_calib else None,
        budgets=tuple(budgets),
        bits=bits,
        clip_sigma=float(clip_sigma),
        rank=rank,
        damping=float(damping),
        seed=seed,
    )

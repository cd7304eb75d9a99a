"""Importance scoring heuristics and top-k index selection.

Four scorers produce a dense non-negative score per weight: seeded random
ranks, activation-aware |w| * ||X_col||_2, Hessian sensitivity w^2 / [H^-1]_jj
from the empirical Hessian (2/N) X^T X with relative diagonal damping, and the
magnitude of a rank-r SVD reconstruction of the weights (the only heuristic
that needs no calibration data). Selection takes the k largest scores with
ties broken by ascending row-major flat index, so results are deterministic
and budgets nest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MaskIndexError, NumericalError, ShapeMismatchError
from .matrix_io import CalibrationBatch, WeightMatrix, read_npy, write_npy

# Below this min-dimension the truncated SVD is computed from a full exact
# decomposition; above it, by seeded randomized subspace iteration.
EXACT_SVD_MAX_DIM = 512
SVD_OVERSAMPLE = 8
SVD_POWER_ITERS = 4


@dataclass(frozen=True)
class ScoreMatrix:
    """Dense non-negative importance scores, same shape as the source layer."""

    layer: str
    method: str
    scores: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 2:
            raise ShapeMismatchError(f"scores for '{self.layer}' must be 2-D, got {s.shape}")
        if not np.isfinite(s).all() or (s < 0).any():
            raise NumericalError(f"scores for '{self.layer}' must be finite and >= 0")
        object.__setattr__(self, "scores", s)

    @property
    def rows(self) -> int:
        return self.scores.shape[0]

    @property
    def cols(self) -> int:
        return self.scores.shape[1]


@dataclass(frozen=True)
class SelectionMask:
    """Protected (row, col) indices for one layer, ordered by flat index.

    `k` is the requested budget; `indices` holds min(k, rows*cols) pairs.
    """

    layer: str
    method: str
    k: int
    indices: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, 2)
        order = np.lexsort((idx[:, 1], idx[:, 0]))
        idx = idx[order]
        if len(idx) > 1 and (np.diff(idx, axis=0) == 0).all(axis=1).any():
            dup = idx[1:][(np.diff(idx, axis=0) == 0).all(axis=1)][0]
            raise MaskIndexError(f"duplicate mask index {tuple(dup)} for layer '{self.layer}'")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def pairs(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in self.indices}


def empty_mask(layer: str, method: str = "none") -> SelectionMask:
    return SelectionMask(layer=layer, method=method, k=0, indices=np.empty((0, 2), np.int64))


def _layer_hash(name: str) -> int:
    return int.from_bytes(hashlib.blake2b(name.encode(), digest_size=8).digest(), "big")


def score_random(w: WeightMatrix, seed: int) -> ScoreMatrix:
    """Seeded permutation ranks: top-k is a uniform random k-subset.

    Because every index gets a distinct rank independent of the budget,
    the selection at budget k is a prefix of the selection at any k' > k.
    The generator is keyed on (seed, layer name).
    """
    rng = np.random.default_rng([seed, _layer_hash(w.name)])
    ranks = rng.permutation(w.rows * w.cols).astype(np.float64).reshape(w.rows, w.cols)
    return ScoreMatrix(layer=w.name, method="random", scores=ranks, seed=seed)


def score_awq(w: WeightMatrix, x: CalibrationBatch) -> ScoreMatrix:
    """Activation-aware score: |w_ij| times the L2 norm of activation column j."""
    if x.features != w.cols:
        raise ShapeMismatchError(
            f"calibration has {x.features} features, layer '{w.name}' has {w.cols} columns"
        )
    norms = np.linalg.norm(x.values.astype(np.float64), axis=0)
    scores = np.abs(w.values.astype(np.float64)) * norms[np.newaxis, :]
    return ScoreMatrix(layer=w.name, method="awq", scores=scores)


@dataclass(frozen=True)
class HessianInfo:
    """Empirical input Hessian for one layer plus its damped inverse diagonal."""

    dim: int
    matrix: np.ndarray
    damping: float
    inverse_diag: np.ndarray


def compute_hessian(x: CalibrationBatch) -> np.ndarray:
    """Empirical Hessian (2/N) X^T X, symmetric PSD, in float64."""
    v = x.values.astype(np.float64)
    h = (2.0 / x.samples) * (v.T @ v)
    return (h + h.T) / 2.0


def damped_inverse_diag(h: np.ndarray, damping: float) -> np.ndarray:
    """Diagonal of (H + damping * mean(diag(H)) * I)^-1 via Cholesky.

    The damping is relative to the mean diagonal, so the result is invariant
    under rescaling of H.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ShapeMismatchError(f"Hessian must be square, got {h.shape}")
    mean_diag = float(np.trace(h)) / h.shape[0]
    if mean_diag <= 0:
        raise NumericalError("Hessian diagonal is not positive; cannot damp and invert")
    damped = h + (damping * mean_diag) * np.eye(h.shape[0])
    try:
        lower = np.linalg.cholesky(damped)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"damped Hessian is not positive definite: {exc}") from exc
    # diag(A^-1) for A = L L^T: column-wise squared norms of L^-1.
    lower_inv = np.linalg.solve(lower, np.eye(h.shape[0]))
    diag = (lower_inv**2).sum(axis=0)
    if (diag <= 0).any():
        raise NumericalError("inverse diagonal has non-positive entries")
    return diag


def hessian_info(x: CalibrationBatch, damping: float) -> HessianInfo:
    h = compute_hessian(x)
    return HessianInfo(
        dim=x.features, matrix=h, damping=damping, inverse_diag=damped_inverse_diag(h, damping)
    )


def score_spqr(w: WeightMatrix, h: HessianInfo) -> ScoreMatrix:
    """Second-order sensitivity: w_ij^2 divided by the damped inverse Hessian diagonal."""
    if h.dim != w.cols:
        raise ShapeMismatchError(
            f"Hessian dim {h.dim} does not match layer '{w.name}' columns {w.cols}"
        )
    scores = w.values.astype(np.float64) ** 2 / h.inverse_diag[np.newaxis, :]
    return ScoreMatrix(layer=w.name, method="spqr", scores=scores)


@dataclass(frozen=True)
class PrincipalStructure:
    """Top-r singular triplets of a weight matrix and their reconstruction."""

    rank: int
    left: np.ndarray
    singular: np.ndarray
    right: np.ndarray
    reconstruction: np.ndarray


def truncated_svd(w: WeightMatrix, rank: int, seed: int = 0) -> PrincipalStructure:
    """Top-rank singular triplets of the weights.

    Exact (full decomposition, truncated) when min(rows, cols) <= 512;
    otherwise seeded randomized subspace iteration with oversampling 8 and
    4 power iterations. rank is clamped to min(rows, cols).
    """
    a = w.values.astype(np.float64)
    r = min(rank, min(a.shape))
    if r < 1:
        raise ShapeMismatchError(f"rank must be >= 1, got {rank}")
    if min(a.shape) <= EXACT_SVD_MAX_DIM:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    else:
        rng = np.random.default_rng([seed, _layer_hash(w.name)])
        probe = rng.standard_normal((a.shape[1], r + SVD_OVERSAMPLE))
        q, _ = np.linalg.qr(a @ probe)
        for _ in range(SVD_POWER_ITERS):
            z, _ = np.linalg.qr(a.T @ q)
            q, _ = np.linalg.qr(a @ z)
        u_small, s, vt = np.linalg.svd(q.T @ a, full_matrices=False)
        u = q @ u_small
    u, s, vt = u[:, :r], s[:r], vt[:r, :]
    recon = (u * s) @ vt
    return PrincipalStructure(rank=r, left=u, singular=s, right=vt.T, reconstruction=recon)


def score_svd(w: WeightMatrix, rank: int, seed: int = 0) -> ScoreMatrix:
    """Structural score: magnitude of the rank-r reconstruction of the weights.

    Needs only the weights themselves, no calibration data.
    """
    principal = truncated_svd(w, rank, seed=seed)
    return ScoreMatrix(layer=w.name, method="svd", scores=np.abs(principal.reconstruction))


def top_k_select(scores: ScoreMatrix, k: int) -> SelectionMask:
    """Select the min(k, size) indices with the largest scores.

    Ties break by ascending row-major flat index, which makes selections
    deterministic and nested across growing budgets.
    """
    if k < 0:
        raise MaskIndexError(f"budget must be >= 0, got {k}")
    flat = scores.scores.ravel()
    take = min(k, flat.size)
    order = np.argsort(-flat, kind="stable")[:take]
    rows, cols = np.divmod(np.sort(order), scores.cols)
    return SelectionMask(
        layer=scores.layer,
        method=scores.method,
        k=k,
        indices=np.stack([rows, cols], axis=1),
        seed=scores.seed,
    )


def save_mask(mask: SelectionMask, npy_path, json_path) -> None:
    """Write mask.npy (int64 rows/cols sorted by flat index) and mask.json metadata."""
    write_npy(npy_path, mask.indices)
    meta = {"method": mask.method, "k": mask.k, "seed": mask.seed, "layer": mask.layer}
    Path(json_path).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_mask(npy_path, json_path) -> SelectionMask:
    indices = read_npy(npy_path, "<i8")
    meta = json.loads(Path(json_path).read_text(encoding="utf-8"))
    return SelectionMask(
        layer=meta["layer"],
        method=meta["method"],
        k=int(meta["k"]),
        indices=indices,
        seed=meta.get("seed"),
    )

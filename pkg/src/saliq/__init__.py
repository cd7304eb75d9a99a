"""Mixed-precision weight quantization with saliency-guided protection.

Decomposes a weight matrix into a sparse full-precision salient component and
a dense low-bit residual. Salient entries are chosen by one of four
heuristics (random, activation-aware, Hessian-based, SVD-based); analysis
utilities measure how the selections overlap and how well each preserves the
layer.
"""

from .analysis import (
    ErrorRecord,
    OverlapRecord,
    SweepReport,
    iou,
    oracle_select,
    output_error,
    reconstruction_error,
    run_sweep,
    synthetic_outlier_layer,
)
from .errors import (
    ConfigValidationError,
    DataIntegrityError,
    FormatError,
    MaskIndexError,
    NumericalError,
    SaliqError,
    ShapeMismatchError,
    SweepCellError,
    UnsupportedLayoutError,
)
from .matrix_io import (
    CalibrationBatch,
    SweepConfig,
    WeightMatrix,
    discover_layers,
    load_calibration,
    load_matrix,
    parse_config,
    save_calibration,
    save_matrix,
)
from .quant import (
    QuantConfig,
    QuantizedLayer,
    clip_threshold,
    load_quantized,
    quantize_residual,
    quantize_unprotected,
    reconstruct,
    save_quantized,
)
from .saliency import (
    HessianInfo,
    PrincipalStructure,
    ScoreMatrix,
    SelectionMask,
    compute_hessian,
    damped_inverse_diag,
    empty_mask,
    hessian_info,
    load_mask,
    save_mask,
    score_awq,
    score_random,
    score_spqr,
    score_svd,
    top_k_select,
    truncated_svd,
)

__version__ = "0.1.0"

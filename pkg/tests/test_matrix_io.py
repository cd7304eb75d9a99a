import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays, array_shapes

from saliq import (
    ConfigValidationError,
    DataIntegrityError,
    FormatError,
    ShapeMismatchError,
    UnsupportedLayoutError,
    WeightMatrix,
    load_calibration,
    load_matrix,
    parse_config,
    save_matrix,
)
from saliq.matrix_io import DEFAULT_BUDGETS, discover_layers, read_npy, write_npy

from conftest import wm


# ---------------------------------------------------------------- round trips


def test_zero_matrix_round_trip(tmp_path):
    path = tmp_path / "z.npy"
    save_matrix(wm(np.zeros((2, 3)), "z"), path)
    loaded = load_matrix(path)
    assert loaded.rows == 2 and loaded.cols == 3
    assert loaded.name == "z"
    assert (loaded.values == 0.0).all()


def test_single_value_round_trip(tmp_path):
    path = tmp_path / "one.npy"
    save_matrix(wm([[3.5]]), path)
    assert load_matrix(path).values[0, 0] == np.float32(3.5)


def test_random_matrix_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(7)
    values = rng.standard_normal((128, 128)).astype(np.float32)
    path = tmp_path / "m.npy"
    save_matrix(wm(values, "m"), path)
    loaded = load_matrix(path)
    assert loaded.values.tobytes() == values.tobytes()


@settings(max_examples=60, deadline=None)
@given(
    arrays(
        np.float32,
        array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=8),
        elements=st.floats(-1e6, 1e6, width=32, allow_nan=False, allow_infinity=False),
    )
)
def test_round_trip_property(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "m.npy"
    save_matrix(wm(values), path)
    assert load_matrix(path).values.tobytes() == values.tobytes()


def test_numpy_can_read_our_files(tmp_path):
    values = np.random.default_rng(0).standard_normal((5, 9)).astype(np.float32)
    path = tmp_path / "m.npy"
    save_matrix(wm(values), path)
    via_numpy = np.load(path)
    assert via_numpy.dtype == np.float32
    assert via_numpy.tobytes() == values.tobytes()


def test_we_can_read_numpy_files(tmp_path):
    values = np.random.default_rng(1).standard_normal((9, 4)).astype(np.float32)
    path = tmp_path / "m.npy"
    np.save(path, values)
    assert load_matrix(path).values.tobytes() == values.tobytes()


# ---------------------------------------------------------------- strict rejection


@pytest.mark.parametrize("dtype", [np.float64, np.int32, np.int16, ">f4"])
def test_wrong_dtype_rejected_not_converted(tmp_path, dtype):
    path = tmp_path / "bad.npy"
    np.save(path, np.ones((2, 2), dtype=np.dtype(dtype)))
    with pytest.raises(UnsupportedLayoutError):
        load_matrix(path)


def test_fortran_order_rejected(tmp_path):
    path = tmp_path / "f.npy"
    np.save(path, np.asfortranarray(np.ones((3, 4), dtype=np.float32)))
    with pytest.raises(UnsupportedLayoutError):
        load_matrix(path)


@pytest.mark.parametrize("shape", [(6,), (2, 3, 4)])
def test_wrong_rank_rejected(tmp_path, shape):
    path = tmp_path / "r.npy"
    np.save(path, np.ones(shape, dtype=np.float32))
    with pytest.raises(UnsupportedLayoutError):
        load_matrix(path)


def test_nan_payload_rejected_on_load(tmp_path):
    path = tmp_path / "nan.npy"
    np.save(path, np.array([[1.0, np.nan]], dtype=np.float32))
    with pytest.raises(DataIntegrityError):
        load_matrix(path)


def test_inf_payload_rejected_on_load(tmp_path):
    path = tmp_path / "inf.npy"
    np.save(path, np.array([[np.inf, 1.0]], dtype=np.float32))
    with pytest.raises(DataIntegrityError):
        load_matrix(path)


def test_nan_rejected_before_any_write(tmp_path):
    matrix = wm([[1.0, 2.0]])
    matrix.values[0, 0] = np.nan  # mutate after construction-time validation
    path = tmp_path / "out.npy"
    with pytest.raises(DataIntegrityError):
        save_matrix(matrix, path)
    assert not path.exists()


def test_empty_dimension_rejected(tmp_path):
    path = tmp_path / "e.npy"
    write_npy(path, np.zeros((0, 3), dtype=np.float32))
    with pytest.raises(UnsupportedLayoutError):
        load_matrix(path)


# ---------------------------------------------------------------- malformed headers


def _valid_file_bytes():
    import io

    buf = io.BytesIO()
    np.save(buf, np.ones((2, 2), dtype=np.float32))
    return bytearray(buf.getvalue())


def test_bad_magic(tmp_path):
    raw = _valid_file_bytes()
    raw[0] = 0x00
    path = tmp_path / "m.npy"
    path.write_bytes(raw)
    with pytest.raises(FormatError, match="magic"):
        load_matrix(path)


def test_unsupported_version(tmp_path):
    raw = _valid_file_bytes()
    raw[6:8] = b"\x02\x00"
    path = tmp_path / "m.npy"
    path.write_bytes(raw)
    with pytest.raises(FormatError, match="version"):
        load_matrix(path)


def test_truncated_file(tmp_path):
    path = tmp_path / "m.npy"
    path.write_bytes(_valid_file_bytes()[:8])
    with pytest.raises(FormatError, match="truncated"):
        load_matrix(path)


def test_truncated_payload(tmp_path):
    raw = _valid_file_bytes()
    path = tmp_path / "m.npy"
    path.write_bytes(raw[:-4])
    with pytest.raises(FormatError, match="payload"):
        load_matrix(path)


def test_header_not_a_dict(tmp_path):
    header = b"[1, 2, 3]" + b" " * 50 + b"\n"
    raw = b"\x93NUMPY\x01\x00" + len(header).to_bytes(2, "little") + header
    path = tmp_path / "m.npy"
    path.write_bytes(raw)
    with pytest.raises(FormatError, match="dict"):
        load_matrix(path)


def test_header_missing_descr_named_in_error(tmp_path):
    header = b"{'fortran_order': False, 'shape': (1, 1), }" + b"\n"
    raw = b"\x93NUMPY\x01\x00" + len(header).to_bytes(2, "little") + header + b"\x00" * 4
    path = tmp_path / "m.npy"
    path.write_bytes(raw)
    with pytest.raises(FormatError, match="descr"):
        load_matrix(path)


# ---------------------------------------------------------------- calibration


def test_calibration_standard_batch(tmp_path):
    path = tmp_path / "c.npy"
    np.save(path, np.zeros((128, 768), dtype=np.float32))
    batch = load_calibration(path, "encoder", expected_features=768)
    assert batch.samples == 128 and batch.features == 768
    assert batch.layer == "encoder"


def test_calibration_single_sample(tmp_path):
    path = tmp_path / "c.npy"
    np.save(path, np.ones((1, 4), dtype=np.float32))
    assert load_calibration(path, "tiny", expected_features=4).samples == 1


def test_calibration_feature_mismatch_cites_both(tmp_path):
    path = tmp_path / "c.npy"
    np.save(path, np.zeros((128, 768), dtype=np.float32))
    with pytest.raises(ShapeMismatchError) as err:
        load_calibration(path, "small", expected_features=512)
    assert "768" in str(err.value) and "512" in str(err.value)


# ---------------------------------------------------------------- config parsing


def _write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_defaults_applied(tmp_path):
    cfg = parse_config(_write_config(tmp_path, {"layers": ["a.npy"], "methods": ["svd"]}))
    assert cfg.rank == 8
    assert cfg.damping == 0.01
    assert cfg.bits == 4
    assert cfg.clip_sigma == 2.5
    assert cfg.budgets == DEFAULT_BUDGETS == (1, 16, 64, 256, 1024, 4096)
    assert cfg.seed == 0


def test_defaulting_is_idempotent(tmp_path):
    minimal = parse_config(
        _write_config(tmp_path, {"layers": ["a.npy"], "methods": ["random", "svd"]}, "m.json")
    )
    explicit = parse_config(
        _write_config(
            tmp_path,
            {
                "layers": ["a.npy"],
                "methods": ["random", "svd"],
                "budgets": [1, 16, 64, 256, 1024, 4096],
                "bits": 4,
                "clip_sigma": 2.5,
                "rank": 8,
                "damping": 0.01,
                "seed": 0,
            },
            "e.json",
        )
    )
    assert minimal == explicit


def test_data_aware_method_without_calibration(tmp_path):
    with pytest.raises(ConfigValidationError, match="calibration"):
        parse_config(_write_config(tmp_path, {"layers": ["a.npy"], "methods": ["spqr"]}))


def test_all_violations_reported_together(tmp_path):
    doc = {
        "layers": ["a.npy"],
        "methods": ["svd", "bogus"],
        "budgets": [4096, 1024],
        "bits": 99,
    }
    with pytest.raises(ConfigValidationError) as err:
        parse_config(_write_config(tmp_path, doc))
    text = str(err.value)
    assert "bogus" in text
    assert "increasing" in text
    assert "bits" in text
    assert len(err.value.violations) == 3


def test_unknown_field_rejected(tmp_path):
    with pytest.raises(ConfigValidationError, match="unknown field"):
        parse_config(
            _write_config(tmp_path, {"layers": ["a.npy"], "methods": ["svd"], "bogus_knob": 1})
        )


def test_directory_entries_expand_with_calib_siblings(tmp_path):
    layer_dir = tmp_path / "layers"
    layer_dir.mkdir()
    for name in ("b", "a"):
        np.save(layer_dir / f"{name}.npy", np.zeros((4, 4), dtype=np.float32))
    np.save(layer_dir / "a.calib.npy", np.zeros((8, 4), dtype=np.float32))
    pairs = discover_layers(layer_dir)
    assert [p.stem for p, _ in pairs] == ["a", "b"]
    assert pairs[0][1] is not None and pairs[1][1] is None

    cfg = parse_config(
        _write_config(tmp_path, {"layers": [str(layer_dir)], "methods": ["random"]})
    )
    assert len(cfg.layers) == 2
    assert cfg.calibration is not None
    assert cfg.calibration[0].endswith("a.calib.npy")
    assert cfg.calibration[1] is None


def test_directory_calibration_satisfies_data_aware(tmp_path):
    layer_dir = tmp_path / "layers"
    layer_dir.mkdir()
    np.save(layer_dir / "a.npy", np.zeros((4, 4), dtype=np.float32))
    np.save(layer_dir / "a.calib.npy", np.zeros((8, 4), dtype=np.float32))
    cfg = parse_config(
        _write_config(tmp_path, {"layers": [str(layer_dir)], "methods": ["awq"]})
    )
    assert cfg.methods == ("awq",)


def test_weight_matrix_rejects_nonfinite():
    with pytest.raises(DataIntegrityError):
        WeightMatrix(name="x", values=np.array([[np.nan]], dtype=np.float32))

import gzip

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from diseasefocus.errors import (
    CorruptHeader,
    DimensionMismatch,
    GridMismatch,
    NonFiniteData,
    RangeOverflow,
    UnsupportedDatatype,
)
from diseasefocus.volume import (
    HEADER_DTYPE,
    SCALAR_KINDS,
    Volume3D,
    check_same_grid,
    encode_nifti,
    read_volume,
    write_volume,
)


def test_zero_float32_volume(tmp_path):
    p = tmp_path / "zeros.nii"
    write_volume(Volume3D(np.zeros((8, 8, 8))), p, "float32")
    v = read_volume(p)
    assert v.dims == (8, 8, 8)
    assert v.scalar_kind == "float32"
    assert np.all(v.data == 0.0)


def test_int16_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(1)
    data = rng.integers(-32768, 32768, size=(5, 6, 7)).astype(np.float64)
    v = Volume3D(data, (0.9, 1.1, 2.5), "int16")
    p = tmp_path / "i16.nii"
    write_volume(v, p)
    back = read_volume(p)
    assert back.dims == v.dims
    assert back.spacing == pytest.approx(v.spacing, rel=1e-7)
    assert np.array_equal(back.data, data)
    # payload bytes are the int16 values in x-fastest order
    raw = p.read_bytes()[352:]
    assert raw == data.astype("<i2").tobytes(order="F")


def test_float64_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(2)
    data = rng.normal(size=(16, 16, 16))
    p = tmp_path / "f64.nii.gz"
    write_volume(Volume3D(data), p, "float64")
    back = read_volume(p)
    assert back.data.tobytes() == data.tobytes()


def test_short_payload_is_dimension_mismatch(tmp_path):
    blob = encode_nifti(np.zeros((4, 4, 4)), scalar_kind="float32")
    p = tmp_path / "short.nii"
    p.write_bytes(blob[:-4])  # 63 voxels
    with pytest.raises(DimensionMismatch):
        read_volume(p)


def test_long_payload_is_dimension_mismatch(tmp_path):
    blob = encode_nifti(np.zeros((4, 4, 4)), scalar_kind="uint8")
    p = tmp_path / "long.nii"
    p.write_bytes(blob + b"\x00")
    with pytest.raises(DimensionMismatch):
        read_volume(p)


def test_overflow_int16(tmp_path):
    data = np.zeros((2, 2, 2))
    data[0, 0, 0] = 70000
    with pytest.raises(RangeOverflow):
        write_volume(Volume3D(data), tmp_path / "x.nii", "int16")


def test_non_integral_into_integer_target(tmp_path):
    with pytest.raises(RangeOverflow):
        write_volume(Volume3D(np.full((2, 2, 2), 0.5)), tmp_path / "x.nii", "uint8")


def test_scale_slope_intercept_applied(tmp_path):
    stored = np.arange(24, dtype=np.int16).reshape((2, 3, 4))
    p = tmp_path / "scaled.nii"
    p.write_bytes(encode_nifti(stored, scalar_kind="int16", scl_slope=0.5, scl_inter=-3.0))
    v = read_volume(p)
    assert np.array_equal(v.data, 0.5 * stored.astype(np.float64) - 3.0)


def test_zero_slope_means_unscaled(tmp_path):
    stored = np.arange(8, dtype=np.uint8).reshape((2, 2, 2))
    p = tmp_path / "raw.nii"
    p.write_bytes(encode_nifti(stored, scalar_kind="uint8", scl_slope=0.0, scl_inter=7.0))
    assert np.array_equal(read_volume(p).data, stored)


def _patch_header(blob: bytes, **fields) -> bytes:
    hdr = np.frombuffer(blob[:348], dtype=HEADER_DTYPE).copy()
    for k, v in fields.items():
        hdr[0][k] = v
    return hdr.tobytes() + blob[348:]


def test_unsupported_datatype(tmp_path):
    blob = _patch_header(encode_nifti(np.zeros((2, 2, 2)), scalar_kind="float32"), datatype=32)
    p = tmp_path / "c64.nii"
    p.write_bytes(blob)
    with pytest.raises(UnsupportedDatatype):
        read_volume(p)


def test_bad_header_size(tmp_path):
    blob = _patch_header(encode_nifti(np.zeros((2, 2, 2))), sizeof_hdr=540)
    p = tmp_path / "bad.nii"
    p.write_bytes(blob)
    with pytest.raises(CorruptHeader):
        read_volume(p)


def test_bad_magic(tmp_path):
    blob = _patch_header(encode_nifti(np.zeros((2, 2, 2))), magic=b"xyz")
    p = tmp_path / "bad.nii"
    p.write_bytes(blob)
    with pytest.raises(CorruptHeader):
        read_volume(p)


def test_nonfinite_payload_rejected(tmp_path):
    data = np.zeros((2, 2, 2), dtype=np.float32)
    data[1, 1, 1] = np.nan
    p = tmp_path / "nan.nii"
    p.write_bytes(encode_nifti(data, scalar_kind="float32"))
    with pytest.raises(NonFiniteData):
        read_volume(p)


def test_ni1_pair(tmp_path):
    data = np.arange(27, dtype=np.float32).reshape((3, 3, 3))
    blob = _patch_header(encode_nifti(data, scalar_kind="float32"), magic=b"ni1", vox_offset=0)
    (tmp_path / "pair.hdr").write_bytes(blob[:348])
    (tmp_path / "pair.img").write_bytes(blob[352:])
    assert np.array_equal(read_volume(tmp_path / "pair.hdr").data, data)


def test_volume_rejects_nan_and_bad_spacing():
    with pytest.raises(NonFiniteData):
        Volume3D(np.full((2, 2, 2), np.inf))
    with pytest.raises(ValueError):
        Volume3D(np.zeros((2, 2, 2)), (1.0, 0.0, 1.0))


def test_volume_is_immutable():
    v = Volume3D(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        v.data[0, 0, 0] = 1.0


def test_gzip_container_is_real_gzip(tmp_path):
    p = tmp_path / "v.nii.gz"
    write_volume(Volume3D(np.ones((3, 3, 3))), p, "float32")
    with gzip.open(p) as fh:
        assert fh.read(4) == np.int32(348).tobytes()


def test_readable_by_nibabel(tmp_path):
    nib = pytest.importorskip("nibabel")
    rng = np.random.default_rng(3)
    data = rng.normal(size=(4, 5, 6))
    p = tmp_path / "v.nii.gz"
    write_volume(Volume3D(data, (1.0, 2.0, 3.0)), p, "float64")
    img = nib.load(str(p))
    assert img.shape == (4, 5, 6)
    assert img.header.get_zooms() == (1.0, 2.0, 3.0)
    assert np.array_equal(np.asarray(img.dataobj), data)


def test_reads_nibabel_output(tmp_path):
    nib = pytest.importorskip("nibabel")
    data = np.arange(60, dtype=np.int16).reshape((3, 4, 5))
    img = nib.Nifti1Image(data, np.diag([1.5, 1.5, 2.0, 1.0]))
    img.header.set_slope_inter(2.0, 1.0)
    p = tmp_path / "nb.nii"
    nib.save(img, str(p))
    v = read_volume(p)
    assert v.spacing == (1.5, 1.5, 2.0)
    assert np.array_equal(v.data, np.asarray(nib.load(str(p)).dataobj))


@pytest.mark.parametrize(
    "a,b,ok",
    [
        (((8, 8, 8), (1, 1, 1)), ((8, 8, 8), (1, 1, 1)), True),
        (((8, 8, 8), (1, 1, 1)), ((8, 8, 9), (1, 1, 1)), False),
        (((8, 8, 8), (1, 1, 1)), ((8, 8, 8), (1, 1, 1 + 1e-9)), True),
        (((8, 8, 8), (1, 1, 1)), ((8, 8, 8), (1, 1, 1.001)), False),
    ],
)
def test_check_same_grid(a, b, ok):
    va = Volume3D(np.zeros(a[0]), a[1])
    vb = Volume3D(np.zeros(b[0]), b[1])
    if ok:
        check_same_grid(va, vb)
    else:
        with pytest.raises(GridMismatch) as err:
            check_same_grid(va, vb)
        assert err.value.a_shape == a[0] and err.value.b_shape == b[0]


@settings(max_examples=40, deadline=None)
@given(
    hnp.arrays(
        np.float64,
        hnp.array_shapes(min_dims=3, max_dims=3, min_side=1, max_side=5),
        elements=st.floats(allow_nan=False, allow_infinity=False, width=64),
    ),
    st.tuples(*[st.floats(0.1, 10.0)] * 3),
    st.booleans(),
)
def test_float64_round_trip_property(tmp_path_factory, data, spacing, gz):
    # spacing is stored as float32 in the header
    spacing = tuple(float(np.float32(s)) for s in spacing)
    v = Volume3D(data, spacing)
    p = tmp_path_factory.mktemp("rt") / ("v.nii.gz" if gz else "v.nii")
    write_volume(v, p)
    assert read_volume(p) == v


def test_all_kinds_listed():
    assert set(SCALAR_KINDS) == {"uint8", "int16", "int32", "float32", "float64"}

"""Volume containers and a small NIfTI-1 reader/writer.

Only the subset needed for voxel-space analysis is supported: single-file
(``n+1``) or header/image pair (``ni1``) volumes, little-endian, 3D, with
datatype codes 2, 4, 8, 16 and 64.  Orientation fields are written with a
plain scaled identity and ignored on read.
"""

from __future__ import annotations

import gzip
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from diseasefocus.errors import (
    CorruptHeader,
    DimensionMismatch,
    GridMismatch,
    IoFailure,
    NonFiniteData,
    RangeOverflow,
    UnsupportedDatatype,
)

# name -> (nifti datatype code, numpy little-endian dtype)
SCALAR_KINDS = {
    "uint8": (2, np.dtype("<u1")),
    "int16": (4, np.dtype("<i2")),
    "int32": (8, np.dtype("<i4")),
    "float32": (16, np.dtype("<f4")),
    "float64": (64, np.dtype("<f8")),
}
_CODE_TO_KIND = {code: name for name, (code, _) in SCALAR_KINDS.items()}
INTEGER_KINDS = ("uint8", "int16", "int32")

HEADER_SIZE = 348
_VOX_OFFSET = 352

HEADER_DTYPE = np.dtype(
    [
        ("sizeof_hdr", "<i4"),
        ("data_type", "S10"),
        ("db_name", "S18"),
        ("extents", "<i4"),
        ("session_error", "<i2"),
        ("regular", "S1"),
        ("dim_info", "u1"),
        ("dim", "<i2", (8,)),
        ("intent_p1", "<f4"),
        ("intent_p2", "<f4"),
        ("intent_p3", "<f4"),
        ("intent_code", "<i2"),
        ("datatype", "<i2"),
        ("bitpix", "<i2"),
        ("slice_start", "<i2"),
        ("pixdim", "<f4", (8,)),
        ("vox_offset", "<f4"),
        ("scl_slope", "<f4"),
        ("scl_inter", "<f4"),
        ("slice_end", "<i2"),
        ("slice_code", "u1"),
        ("xyzt_units", "u1"),
        ("cal_max", "<f4"),
        ("cal_min", "<f4"),
        ("slice_duration", "<f4"),
        ("toffset", "<f4"),
        ("glmax", "<i4"),
        ("glmin", "<i4"),
        ("descrip", "S80"),
        ("aux_file", "S24"),
        ("qform_code", "<i2"),
        ("sform_code", "<i2"),
        ("quatern_b", "<f4"),
        ("quatern_c", "<f4"),
        ("quatern_d", "<f4"),
        ("qoffset_x", "<f4"),
        ("qoffset_y", "<f4"),
        ("qoffset_z", "<f4"),
        ("srow_x", "<f4", (4,)),
        ("srow_y", "<f4", (4,)),
        ("srow_z", "<f4", (4,)),
        ("intent_name", "S16"),
        ("magic", "S4"),
    ]
)
assert HEADER_DTYPE.itemsize == HEADER_SIZE


@dataclass(frozen=True, eq=False)
class Volume3D:
    """Dense 3D scalar grid.

    ``data`` is indexed ``[x, y, z]``; on disk x varies fastest.  Values are
    held as float64 regardless of ``scalar_kind``, which only records the
    storage type the volume came from (or should go to).
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    scalar_kind: str = "float64"

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"expected a non-empty 3D array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteData("volume contains NaN or Inf")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(s > 0 and np.isfinite(s) for s in spacing):
            raise ValueError(f"spacing must be three positive numbers, got {self.spacing}")
        if self.scalar_kind not in SCALAR_KINDS:
            raise UnsupportedDatatype(f"unknown scalar kind {self.scalar_kind!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    @property
    def n_voxels(self) -> int:
        return int(self.data.size)

    def with_data(self, data, scalar_kind: str = "float64") -> "Volume3D":
        """New volume on the same grid carrying ``data``."""
        return Volume3D(data, self.spacing, scalar_kind)

    def __eq__(self, other):
        if not isinstance(other, Volume3D):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and self.scalar_kind == other.scalar_kind
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None


def check_same_grid(a: Volume3D, b: Volume3D, rtol: float = 1e-6) -> None:
    """Raise :class:`GridMismatch` unless ``a`` and ``b`` share dims and spacing."""
    if a.dims != b.dims:
        raise GridMismatch(a.dims, b.dims)
    for sa, sb in zip(a.spacing, b.spacing):
        if abs(sa - sb) > rtol * max(abs(sa), abs(sb)):
            raise GridMismatch(a.dims, b.dims, f"spacing {a.spacing} vs {b.spacing}")


# ---------------------------------------------------------------------------
# encoding


def _check_representable(data: np.ndarray, kind: str) -> None:
    if kind not in INTEGER_KINDS:
        return
    info = np.iinfo(SCALAR_KINDS[kind][1])
    lo, hi = float(data.min()), float(data.max())
    if lo < info.min or hi > info.max:
        raise RangeOverflow(
            f"values in [{lo}, {hi}] do not fit {kind} range [{info.min}, {info.max}]"
        )
    if not np.array_equal(data, np.round(data)):
        raise RangeOverflow(f"non-integral values cannot be stored as {kind}")


def encode_nifti(
    data: np.ndarray,
    spacing=(1.0, 1.0, 1.0),
    scalar_kind: str = "float32",
    scl_slope: float = 0.0,
    scl_inter: float = 0.0,
) -> bytes:
    """Serialize raw stored values into single-file NIfTI-1 bytes.

    ``data`` is written as-is (no inverse scaling); ``scl_slope`` and
    ``scl_inter`` only land in the header.
    """
    if scalar_kind not in SCALAR_KINDS:
        raise UnsupportedDatatype(f"unknown scalar kind {scalar_kind!r}")
    code, dtype = SCALAR_KINDS[scalar_kind]
    data = np.asarray(data)
    if data.ndim != 3:
        raise ValueError(f"expected 3D data, got shape {data.shape}")

    hdr = np.zeros((), dtype=HEADER_DTYPE)
    hdr["sizeof_hdr"] = HEADER_SIZE
    hdr["regular"] = b"r"
    hdr["dim"] = [3, *data.shape, 1, 1, 1, 1]
    hdr["datatype"] = code
    hdr["bitpix"] = dtype.itemsize * 8
    hdr["pixdim"] = [1.0, *spacing, 1.0, 1.0, 1.0, 1.0]
    hdr["vox_offset"] = _VOX_OFFSET
    hdr["scl_slope"] = scl_slope
    hdr["scl_inter"] = scl_inter
    hdr["xyzt_units"] = 2  # mm
    hdr["sform_code"] = 1
    hdr["srow_x"] = [spacing[0], 0, 0, 0]
    hdr["srow_y"] = [0, spacing[1], 0, 0]
    hdr["srow_z"] = [0, 0, spacing[2], 0]
    hdr["magic"] = b"n+1\x00"

    payload = np.asarray(data, dtype=dtype).tobytes(order="F")
    return hdr.tobytes() + b"\x00" * (_VOX_OFFSET - HEADER_SIZE) + payload


def write_volume(v: Volume3D, path, scalar_kind: str | None = None) -> None:
    """Write ``v`` as a single-file NIfTI-1 volume (gzipped if ``path`` ends in .gz).

    Integer targets must hold the values exactly; otherwise :class:`RangeOverflow`.
    """
    kind = scalar_kind or v.scalar_kind
    if kind not in SCALAR_KINDS:
        raise UnsupportedDatatype(f"unknown scalar kind {kind!r}")
    _check_representable(v.data, kind)
    blob = encode_nifti(v.data, v.spacing, kind)
    path = Path(path)
    try:
        if path.suffix == ".gz":
            # mtime=0 keeps the container byte-stable
            with open(path, "wb") as raw, gzip.GzipFile(
                filename="", mode="wb", fileobj=raw, mtime=0
            ) as fh:
                fh.write(blob)
        else:
            path.write_bytes(blob)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# decoding


def _read_bytes(path: Path) -> bytes:
    try:
        if path.suffix == ".gz":
            with gzip.open(path, "rb") as fh:
                return fh.read()
        return path.read_bytes()
    except FileNotFoundError:
        raise
    except (OSError, EOFError) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def decode_header(blob: bytes) -> np.ndarray:
    if len(blob) < HEADER_SIZE:
        raise CorruptHeader(f"file too short for a NIfTI-1 header ({len(blob)} bytes)")
    hdr = np.frombuffer(blob[:HEADER_SIZE], dtype=HEADER_DTYPE)[0]
    if int(hdr["sizeof_hdr"]) != HEADER_SIZE:
        swapped = int(np.frombuffer(blob[:4], dtype=">i4")[0])
        extra = " (big-endian files are not supported)" if swapped == HEADER_SIZE else ""
        raise CorruptHeader(f"sizeof_hdr is {int(hdr['sizeof_hdr'])}, expected 348{extra}")
    if bytes(hdr["magic"]) not in (b"n+1", b"ni1"):
        raise CorruptHeader(f"bad magic {bytes(hdr['magic'])!r}")
    return hdr


def _header_geometry(hdr) -> tuple[tuple[int, int, int], tuple[float, float, float]]:
    dim = [int(d) for d in hdr["dim"]]
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise CorruptHeader(f"dim[0] = {ndim} out of range")
    shape = dim[1 : ndim + 1] + [1] * (3 - ndim)
    if any(n < 1 for n in shape):
        raise CorruptHeader(f"non-positive dimension in {shape}")
    if any(n != 1 for n in shape[3:]):
        raise CorruptHeader(f"only 3D volumes are supported, got dims {shape}")
    pixdim = [abs(float(p)) for p in hdr["pixdim"][1:4]]
    spacing = [p if i < ndim else (p or 1.0) for i, p in enumerate(pixdim)]
    if not all(p > 0 and np.isfinite(p) for p in spacing):
        raise CorruptHeader(f"invalid voxel spacing {pixdim}")
    return tuple(shape[:3]), tuple(spacing)


def read_volume(path) -> Volume3D:
    """Load a NIfTI-1 volume, applying ``scl_slope``/``scl_inter`` when slope != 0."""
    path = Path(path)
    blob = _read_bytes(path)
    hdr = decode_header(blob)
    dims, spacing = _header_geometry(hdr)

    code = int(hdr["datatype"])
    kind = _CODE_TO_KIND.get(code)
    if kind is None:
        raise UnsupportedDatatype(f"datatype code {code} is not supported")
    dtype = SCALAR_KINDS[kind][1]

    if bytes(hdr["magic"]) == b"ni1":
        img_path = _pair_image_path(path)
        payload = _read_bytes(img_path)
        offset = int(hdr["vox_offset"])
    else:
        payload = blob
        offset = int(hdr["vox_offset"])
        if offset < HEADER_SIZE:
            raise CorruptHeader(f"vox_offset {offset} inside the header")
    n = dims[0] * dims[1] * dims[2]
    available = len(payload) - offset
    if available != n * dtype.itemsize:
        raise DimensionMismatch(
            f"header dims {dims} need {n} voxels of {kind} "
            f"but payload holds {available / dtype.itemsize:g}"
        )
    raw = np.frombuffer(payload, dtype=dtype, count=n, offset=offset)
    data = raw.astype(np.float64).reshape(dims, order="F")

    slope = float(hdr["scl_slope"])
    inter = float(hdr["scl_inter"])
    if slope != 0.0 and np.isfinite(slope):
        data = data * slope + (inter if np.isfinite(inter) else 0.0)
    if not np.isfinite(data).all():
        raise NonFiniteData(f"{path} contains NaN or Inf values")
    return Volume3D(data, spacing, kind)


def _pair_image_path(path: Path) -> Path:
    name = os.fspath(path)
    for hdr_ext, img_ext in ((".hdr.gz", ".img.gz"), (".hdr", ".img")):
        if name.endswith(hdr_ext):
            return Path(name[: -len(hdr_ext)] + img_ext)
    raise CorruptHeader(f"'ni1' header {path} has no .hdr extension to pair with")

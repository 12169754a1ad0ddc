"""Seedable volume augmentations: grey dilation/erosion, random crop, random rotation.

Random transforms draw from ``numpy.random.default_rng(seed)`` (PCG64), so
the output is a pure function of input, parameters and seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from diseasefocus.errors import CropTooLarge
from diseasefocus.volume import Volume3D


@dataclass(frozen=True, eq=False)
class StructuringElement:
    """Boolean k*k*k neighbourhood mask, k odd, centre voxel set."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 3 or len(set(mask.shape)) != 1 or mask.shape[0] % 2 != 1:
            raise ValueError(f"structuring element must be an odd k*k*k cube, got {mask.shape}")
        c = mask.shape[0] // 2
        if not mask[c, c, c]:
            raise ValueError("structuring element must contain its centre voxel")
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)

    @property
    def size(self) -> int:
        return self.mask.shape[0]

    @classmethod
    def cube(cls, k: int = 3) -> "StructuringElement":
        return cls(np.ones((k, k, k), dtype=bool))

    @classmethod
    def ball(cls, k: int = 3) -> "StructuringElement":
        r = k // 2
        g = np.arange(k) - r
        d2 = g[:, None, None] ** 2 + g[None, :, None] ** 2 + g[None, None, :] ** 2
        return cls(d2 <= r * r)

    def offsets(self) -> np.ndarray:
        """Neighbour offsets relative to the centre, shape (m, 3)."""
        return np.argwhere(self.mask) - self.size // 2


def grey_dilate(v: Volume3D, se: StructuringElement | None = None) -> Volume3D:
    """Neighbourhood maximum with edge-replicating padding."""
    se = se or StructuringElement.cube()
    return v.with_data(ndimage.maximum_filter(v.data, footprint=se.mask, mode="nearest"))


def grey_erode(v: Volume3D, se: StructuringElement | None = None) -> Volume3D:
    """Neighbourhood minimum over the same neighbourhood as :func:`grey_dilate`."""
    se = se or StructuringElement.cube()
    return v.with_data(ndimage.minimum_filter(v.data, footprint=se.mask, mode="nearest"))


def random_crop(v: Volume3D, out_dims, seed=None) -> Volume3D:
    """Contiguous sub-volume at a uniformly drawn valid offset."""
    out_dims = tuple(int(d) for d in out_dims)
    if len(out_dims) != 3 or any(d < 1 for d in out_dims):
        raise ValueError(f"crop dims must be three positive integers, got {out_dims}")
    if any(o > n for o, n in zip(out_dims, v.dims)):
        raise CropTooLarge(f"crop {out_dims} larger than volume {v.dims}")
    rng = np.random.default_rng(seed)
    start = [int(rng.integers(0, n - o + 1)) for n, o in zip(v.dims, out_dims)]
    sl = tuple(slice(s, s + o) for s, o in zip(start, out_dims))
    return v.with_data(v.data[sl])


# in-plane axes for rotation about x, y, z
_PLANES = {0: (1, 2), 1: (2, 0), 2: (0, 1)}


def rotate_nearest(data: np.ndarray, axis: int, angle_deg: float) -> np.ndarray:
    """Rotate about the volume centre; nearest-neighbour lookup, outside samples 0."""
    a, b = _PLANES[axis]
    theta = np.deg2rad(angle_deg)
    cos, sin = np.cos(theta), np.sin(theta)
    shape = np.array(data.shape)
    centre = (shape - 1) / 2.0
    grid = np.indices(data.shape, dtype=np.float64)
    src = grid.copy()
    da = grid[a] - centre[a]
    db = grid[b] - centre[b]
    # inverse rotation maps each output voxel back to its source
    src[a] = cos * da + sin * db + centre[a]
    src[b] = -sin * da + cos * db + centre[b]
    idx = np.rint(src).astype(np.int64)
    inside = np.all((idx >= 0) & (idx < shape[:, None, None, None]), axis=0)
    out = np.zeros_like(data)
    out[inside] = data[tuple(i[inside] for i in idx)]
    return out


def random_rotate(v: Volume3D, max_angle: float, seed=None) -> Volume3D:
    """Rotate about a random axis by a random angle in [-max_angle, max_angle] degrees."""
    if max_angle < 0:
        raise ValueError(f"max angle must be non-negative, got {max_angle}")
    rng = np.random.default_rng(seed)
    axis = int(rng.integers(0, 3))
    angle = float(rng.uniform(-max_angle, max_angle)) if max_angle > 0 else 0.0
    if angle == 0.0:
        return v.with_data(v.data)
    return v.with_data(rotate_nearest(v.data, axis, angle))


def augment(
    v: Volume3D,
    *,
    dilate: bool = False,
    erode: bool = False,
    se_size: int = 3,
    crop=None,
    rotate_max: float | None = None,
    seed=None,
) -> Volume3D:
    """Apply the requested steps in order: morphology, crop, rotation."""
    se = StructuringElement.cube(se_size)
    if dilate:
        v = grey_dilate(v, se)
    if erode:
        v = grey_erode(v, se)
    seeds = np.random.SeedSequence(seed).spawn(2)
    if crop is not None:
        v = random_crop(v, crop, np.random.default_rng(seeds[0]))
    if rotate_max is not None:
        v = random_rotate(v, rotate_max, np.random.default_rng(seeds[1]))
    return v

"""Gradient saliency maps: ``S = |dy/dX|`` followed by per-map min-max scaling.

The gradient is taken of the scalar pre-activation score of the positive
(AD) class.  Gradients imported from other toolchains should follow the same
convention; gradients of a post-softmax probability rescale voxels
non-uniformly across subjects and will not rank regions the same way.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from diseasefocus.errors import ConstantMapWarning
from diseasefocus.scoring import ScoreModel
from diseasefocus.volume import Volume3D, read_volume, write_volume


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    grid: Volume3D
    normalized: bool = False
    source: str = ""
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.grid.data.min() < 0:
            raise ValueError("saliency values must be non-negative")
        if self.normalized and self.grid.data.max() > 1.0:
            raise ValueError("normalized saliency values must lie in [0, 1]")

    @property
    def data(self) -> np.ndarray:
        return self.grid.data

    @property
    def dims(self):
        return self.grid.dims


def compute_saliency(model: ScoreModel, x: Volume3D) -> SaliencyMap:
    grad = model.input_gradient(x)
    return SaliencyMap(grad.with_data(np.abs(grad.data)), False, model.model_id)


def min_max_normalize(s: SaliencyMap) -> SaliencyMap:
    """Rescale to [0, 1].  A constant map becomes all zeros and carries a warning."""
    v = s.data
    lo, hi = v.min(), v.max()
    notes = s.warnings
    if hi == lo:
        msg = f"constant saliency map ({s.source or 'unnamed'}, value {lo:g}); set to zeros"
        warnings.warn(msg, ConstantMapWarning, stacklevel=2)
        out = np.zeros_like(v)
        if "constant-map" not in notes:
            notes = notes + ("constant-map",)
    else:
        out = (v - lo) / (hi - lo)
        # guard against 1 ulp overshoot from the division
        np.clip(out, 0.0, 1.0, out=out)
    return SaliencyMap(s.grid.with_data(out), True, s.source, notes)


def import_saliency(path, already_absolute: bool = False) -> SaliencyMap:
    """Load an externally computed gradient (or saliency) volume."""
    vol = read_volume(path)
    data = vol.data if already_absolute else np.abs(vol.data)
    return SaliencyMap(vol.with_data(data), False, str(path))


def export_saliency(s: SaliencyMap, path, scalar_kind: str = "float64") -> None:
    write_volume(s.grid, path, scalar_kind)

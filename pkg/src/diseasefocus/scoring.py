"""Differentiable scalar scoring models with exact input gradients.

These are small reference models standing in for a trained classifier: each
maps a volume to a scalar class score ``y`` and returns ``dy/dX`` on the
input grid.  Gradients of real networks computed elsewhere enter the
pipeline as gradient volumes instead (see :func:`diseasefocus.saliency.import_saliency`).

Model parameter files are JSON::

    {"type": "linear", "dims": [nx, ny, nz], "weights": [...], "bias": 0.0}
    {"type": "linear", "weights_file": "w.nii.gz", "bias": 0.0}
    {"type": "tinyconv", "kernel_size": 3, "kernel": [...], "scale": 1.0, "offset": 0.0}

Flat ``weights``/``kernel`` lists are in x-fastest order, the same order
NIfTI stores voxels.  ``weights_file`` is resolved relative to the JSON file.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from pathlib import Path

import numpy as np

from diseasefocus.errors import GridMismatch
from diseasefocus.volume import Volume3D, read_volume


class ScoreModel(ABC):
    """Scalar score ``y(X)`` with its exact gradient ``dy/dX``."""

    model_id: str = "model"

    @abstractmethod
    def score(self, x: Volume3D) -> float: ...

    @abstractmethod
    def input_gradient(self, x: Volume3D) -> Volume3D: ...

    def to_dict(self) -> dict:
        raise NotImplementedError


class LinearScorer(ScoreModel):
    """``y = sum(W * X) + b`` on a fixed grid."""

    def __init__(self, weights, bias: float = 0.0, model_id: str = "linear"):
        if not isinstance(weights, Volume3D):
            weights = Volume3D(weights)
        self.weights = weights
        self.bias = float(bias)
        self.model_id = model_id

    def _check(self, x: Volume3D):
        if x.dims != self.weights.dims:
            raise GridMismatch(self.weights.dims, x.dims)

    def score(self, x: Volume3D) -> float:
        self._check(x)
        # correctly rounded sum keeps finite differences close to the exact value
        return math.fsum(np.append((self.weights.data * x.data).ravel(), self.bias))

    def input_gradient(self, x: Volume3D) -> Volume3D:
        self._check(x)
        return x.with_data(self.weights.data)

    def to_dict(self) -> dict:
        return {
            "type": "linear",
            "dims": list(self.weights.dims),
            "weights": self.weights.data.ravel(order="F").tolist(),
            "bias": self.bias,
        }


def conv3d_same(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Zero-padded 'same' cross-correlation, the convolution used by CNN layers."""
    k = kernel.shape[0]
    p = k // 2
    xp = np.pad(x, p)
    nx, ny, nz = x.shape
    out = np.zeros(x.shape, dtype=np.float64)
    for a, b, c in np.ndindex(kernel.shape):
        w = kernel[a, b, c]
        if w != 0.0:
            out += w * xp[a : a + nx, b : b + ny, c : c + nz]
    return out


def conv3d_same_transpose(g: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`conv3d_same`: maps an output-space field back to input space."""
    k = kernel.shape[0]
    p = k // 2
    nx, ny, nz = g.shape
    acc = np.zeros((nx + 2 * p, ny + 2 * p, nz + 2 * p), dtype=np.float64)
    for a, b, c in np.ndindex(kernel.shape):
        w = kernel[a, b, c]
        if w != 0.0:
            acc[a : a + nx, b : b + ny, c : c + nz] += w * g
    return acc[p : p + nx, p : p + ny, p : p + nz]


class TinyConvScorer(ScoreModel):
    """``y = scale * mean(relu(conv3d_same(X, kernel))) + offset``.

    Works on any grid.  At a rectifier kink (pre-activation exactly 0) the
    subgradient 0 is used.
    """

    def __init__(self, kernel, scale: float = 1.0, offset: float = 0.0, model_id: str = "tinyconv"):
        kernel = np.array(kernel, dtype=np.float64)
        if kernel.ndim != 3 or len(set(kernel.shape)) != 1:
            raise ValueError(f"kernel must be a k*k*k cube, got shape {kernel.shape}")
        if kernel.shape[0] % 2 != 1:
            raise ValueError("kernel size must be odd")
        if not np.isfinite(kernel).all():
            raise ValueError("kernel contains non-finite values")
        kernel.flags.writeable = False
        self.kernel = kernel
        self.scale = float(scale)
        self.offset = float(offset)
        self.model_id = model_id

    @classmethod
    def identity(cls, k: int = 3, **kw) -> "TinyConvScorer":
        kernel = np.zeros((k, k, k))
        kernel[k // 2, k // 2, k // 2] = 1.0
        return cls(kernel, **kw)

    def preactivation(self, x: Volume3D) -> np.ndarray:
        return conv3d_same(x.data, self.kernel)

    def score(self, x: Volume3D) -> float:
        z = self.preactivation(x)
        mean = math.fsum(np.maximum(z, 0.0).ravel()) / z.size
        return self.scale * mean + self.offset

    def input_gradient(self, x: Volume3D) -> Volume3D:
        z = self.preactivation(x)
        upstream = np.where(z > 0.0, self.scale / z.size, 0.0)
        return x.with_data(conv3d_same_transpose(upstream, self.kernel))

    def to_dict(self) -> dict:
        return {
            "type": "tinyconv",
            "kernel_size": self.kernel.shape[0],
            "kernel": self.kernel.ravel(order="F").tolist(),
            "scale": self.scale,
            "offset": self.offset,
        }


def score(model: ScoreModel, x: Volume3D) -> float:
    return model.score(x)


def input_gradient(model: ScoreModel, x: Volume3D) -> Volume3D:
    return model.input_gradient(x)


def central_difference_gradient(model: ScoreModel, x: Volume3D, step: float) -> np.ndarray:
    """Numerical ``dy/dX`` by central differences, one voxel at a time."""
    if not step > 0:
        raise ValueError(f"finite-difference step must be positive, got {step}")
    base = np.array(x.data)
    grad = np.empty_like(base)
    for idx in np.ndindex(base.shape):
        orig = base[idx]
        hi, lo = orig + step, orig - step
        base[idx] = hi
        f_hi = model.score(x.with_data(base))
        base[idx] = lo
        f_lo = model.score(x.with_data(base))
        base[idx] = orig
        # divide by the step actually taken after rounding
        grad[idx] = (f_hi - f_lo) / (hi - lo)
    return grad


def finite_difference_check(model: ScoreModel, x: Volume3D, step: float = 1e-5) -> float:
    """Max over voxels of ``|g_analytic - g_central| / max(1e-12, |g_central|)``."""
    numeric = central_difference_gradient(model, x, step)
    analytic = model.input_gradient(x).data
    rel = np.abs(analytic - numeric) / np.maximum(1e-12, np.abs(numeric))
    return float(rel.max())


def load_model(path) -> ScoreModel:
    path = Path(path)
    spec = json.loads(path.read_text())
    kind = spec.get("type")
    model_id = spec.get("model_id", path.stem)
    if kind == "linear":
        if "weights_file" in spec:
            weights = read_volume(path.parent / spec["weights_file"])
        else:
            dims = tuple(int(d) for d in spec["dims"])
            flat = np.asarray(spec["weights"], dtype=np.float64)
            if flat.size != math.prod(dims):
                raise ValueError(f"{path}: {flat.size} weights for dims {dims}")
            weights = Volume3D(flat.reshape(dims, order="F"))
        return LinearScorer(weights, spec.get("bias", 0.0), model_id=model_id)
    if kind == "tinyconv":
        k = int(spec.get("kernel_size", 3))
        flat = np.asarray(spec["kernel"], dtype=np.float64)
        if flat.size != k**3:
            raise ValueError(f"{path}: kernel needs {k**3} values, got {flat.size}")
        return TinyConvScorer(
            flat.reshape((k, k, k), order="F"),
            spec.get("scale", 1.0),
            spec.get("offset", 0.0),
            model_id=model_id,
        )
    raise ValueError(f"{path}: unknown model type {kind!r}")


def save_model(model: ScoreModel, path) -> None:
    d = model.to_dict()
    d["model_id"] = model.model_id
    Path(path).write_text(json.dumps(d))


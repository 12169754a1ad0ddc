"""Synthetic volumes, label maps and saliency fields with known ground truth.

Random draws use ``numpy.random.default_rng`` (PCG64 seeded through
SeedSequence); multi-subject cohorts spawn one child seed per subject.

The "named-regions" phantom lays out one 3x3x3 box per region of a
FastSurfer-style vocabulary (aseg subcortical structures plus DKT cortical
parcels) on a regular lattice.  The geometry is schematic: it is a fixture
for pipeline tests keyed to real region names, not an anatomical model.

Phantom spec JSON::

    {
      "dims": [24, 24, 20], "spacing": [1, 1, 1],
      "noise_sigma": 0.0, "seed": 0, "background": 0.0,
      "regions": [
        {"id": 17, "name": "Left-Hippocampus", "shape": "box",
         "start": [2, 2, 2], "size": [3, 3, 3], "intensity": 0.8},
        {"id": 18, "name": "Left-Amygdala", "shape": "sphere",
         "center": [10, 10, 10], "radius": 2.5, "intensity": 0.7}
      ]
    }

Overlapping regions are resolved in list order: later regions win.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from diseasefocus.errors import OutOfBoundsGeometry, UnknownRegion
from diseasefocus.labels import LabelMap
from diseasefocus.regions import CohortMember
from diseasefocus.saliency import SaliencyMap, min_max_normalize
from diseasefocus.volume import Volume3D


@dataclass(frozen=True)
class RegionGeometry:
    region_id: int
    name: str
    shape: str = "box"
    start: tuple[int, int, int] = (0, 0, 0)
    size: tuple[int, int, int] = (1, 1, 1)
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.0
    intensity: float = 1.0

    def mask(self, dims) -> np.ndarray:
        if self.shape == "box":
            m = np.zeros(dims, dtype=bool)
            m[tuple(slice(s, s + n) for s, n in zip(self.start, self.size))] = True
            return m
        if self.shape == "sphere":
            grid = np.indices(dims, dtype=np.float64)
            d2 = sum((grid[i] - self.center[i]) ** 2 for i in range(3))
            return d2 <= self.radius**2
        raise ValueError(f"unknown geometry {self.shape!r}")

    def check_bounds(self, dims):
        if self.shape == "box":
            ok = all(s >= 0 and n >= 1 and s + n <= d for s, n, d in zip(self.start, self.size, dims))
        else:
            ok = self.radius >= 0 and all(
                c - self.radius >= 0 and c + self.radius <= d - 1 for c, d in zip(self.center, dims)
            )
        if not ok:
            raise OutOfBoundsGeometry(f"region {self.name!r} ({self.shape}) does not fit grid {tuple(dims)}")

    @classmethod
    def from_dict(cls, d: dict) -> "RegionGeometry":
        shape = d.get("shape", "box")
        kw = dict(region_id=int(d["id"]), name=str(d["name"]), shape=shape, intensity=float(d.get("intensity", 1.0)))
        if shape == "box":
            kw.update(start=tuple(int(v) for v in d["start"]), size=tuple(int(v) for v in d["size"]))
        elif shape == "sphere":
            kw.update(center=tuple(float(v) for v in d["center"]), radius=float(d["radius"]))
        else:
            raise ValueError(f"unknown geometry {shape!r}")
        return cls(**kw)

    def to_dict(self) -> dict:
        d = {"id": self.region_id, "name": self.name, "shape": self.shape, "intensity": self.intensity}
        if self.shape == "box":
            d.update(start=list(self.start), size=list(self.size))
        else:
            d.update(center=list(self.center), radius=self.radius)
        return d


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int]
    regions: tuple[RegionGeometry, ...] = field(default=())
    noise_sigma: float = 0.0
    seed: int = 0
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    background: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "regions", tuple(self.regions))
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")
        names = [r.name for r in self.regions]
        ids = [r.region_id for r in self.regions]
        if len(set(names)) != len(names) or len(set(ids)) != len(ids):
            raise ValueError("region names and ids must be unique")
        if any(i <= 0 for i in ids):
            raise ValueError("region ids must be positive (0 is background)")

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        return cls(
            dims=tuple(d["dims"]),
            regions=tuple(RegionGeometry.from_dict(r) for r in d.get("regions", [])),
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            seed=int(d.get("seed", 0)),
            spacing=tuple(float(s) for s in d.get("spacing", (1.0, 1.0, 1.0))),
            background=float(d.get("background", 0.0)),
        )

    @classmethod
    def load(cls, path) -> "PhantomSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "spacing": list(self.spacing),
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "background": self.background,
            "regions": [r.to_dict() for r in self.regions],
        }


def make_phantom(spec: PhantomSpec) -> tuple[Volume3D, LabelMap]:
    image = np.full(spec.dims, spec.background, dtype=np.float64)
    labels = np.zeros(spec.dims, dtype=np.int64)
    for region in spec.regions:
        region.check_bounds(spec.dims)
        m = region.mask(spec.dims)
        labels[m] = region.region_id
        image[m] = region.intensity
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        image = image + rng.normal(0.0, spec.noise_sigma, size=spec.dims)
    present = set(np.unique(labels).tolist())
    table = {r.region_id: r.name for r in spec.regions if r.region_id in present}
    return (
        Volume3D(image, spec.spacing),
        LabelMap(Volume3D(labels, spec.spacing, "int32"), table),
    )


def make_focused_saliency(
    labels: LabelMap,
    focus_regions: Iterable[str],
    focus_level: float = 0.9,
    background_level: float = 0.1,
    seed=None,
    jitter: float = 0.0,
) -> SaliencyMap:
    """Saliency at ``focus_level`` inside the named regions and ``background_level`` elsewhere.

    Values are already on the normalized [0, 1] scale and are marked normalized
    without rescaling, so region medians equal the configured levels when
    ``jitter`` is 0.
    """
    if not 0 <= background_level < focus_level <= 1:
        raise ValueError("need 0 <= background_level < focus_level <= 1")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    by_name = labels.name_to_id()
    focus = list(focus_regions)
    missing = [n for n in focus if n not in by_name]
    if missing:
        raise UnknownRegion(f"not in label map: {', '.join(missing)}")
    in_focus = np.isin(labels.ids, [by_name[n] for n in focus])
    data = np.where(in_focus, focus_level, background_level).astype(np.float64)
    if jitter > 0:
        rng = np.random.default_rng(seed)
        data = np.clip(data + rng.uniform(-jitter, jitter, size=data.shape), 0.0, 1.0)
    return SaliencyMap(labels.grid.with_data(data), True, "phantom:focused")


def make_uniform_saliency(labels: LabelMap, seed=None) -> SaliencyMap:
    """I.i.d. uniform noise, min-max normalized: attention with no regional preference."""
    rng = np.random.default_rng(seed)
    raw = SaliencyMap(labels.grid.with_data(rng.uniform(0.0, 1.0, size=labels.dims)), False, "phantom:uniform")
    return min_max_normalize(raw)


def focused_members(
    labels: LabelMap,
    focus_regions: Sequence[str],
    outcome: str,
    n: int,
    seed=None,
    focus_level: float = 0.9,
    background_level: float = 0.1,
    jitter: float = 0.05,
) -> list[CohortMember]:
    seeds = np.random.SeedSequence(seed).spawn(n)
    return [
        CohortMember(
            make_focused_saliency(labels, focus_regions, focus_level, background_level, s, jitter),
            outcome,
            labels,
            f"{outcome.lower()}-{i:03d}",
        )
        for i, s in enumerate(seeds)
    ]


def uniform_members(labels: LabelMap, outcome: str, n: int, seed=None) -> list[CohortMember]:
    seeds = np.random.SeedSequence(seed).spawn(n)
    return [
        CohortMember(make_uniform_saliency(labels, s), outcome, labels, f"{outcome.lower()}-{i:03d}")
        for i, s in enumerate(seeds)
    ]


# ---------------------------------------------------------------------------
# named-regions phantom

ASEG_REGIONS = {
    4: "Left-Lateral-Ventricle",
    5: "Left-Inf-Lat-Vent",
    7: "Left-Cerebellum-White-Matter",
    8: "Left-Cerebellum-Cortex",
    10: "Left-Thalamus",
    11: "Left-Caudate",
    12: "Left-Putamen",
    13: "Left-Pallidum",
    14: "3rd-Ventricle",
    15: "4th-Ventricle",
    16: "Brain-Stem",
    17: "Left-Hippocampus",
    18: "Left-Amygdala",
    24: "CSF",
    26: "Left-Accumbens-area",
    28: "Left-VentralDC",
    31: "Left-choroid-plexus",
    43: "Right-Lateral-Ventricle",
    44: "Right-Inf-Lat-Vent",
    46: "Right-Cerebellum-White-Matter",
    47: "Right-Cerebellum-Cortex",
    49: "Right-Thalamus",
    50: "Right-Caudate",
    51: "Right-Putamen",
    52: "Right-Pallidum",
    53: "Right-Hippocampus",
    54: "Right-Amygdala",
    58: "Right-Accumbens-area",
    60: "Right-VentralDC",
    63: "Right-choroid-plexus",
}

DKT_PARCELS = {
    2: "caudalanteriorcingulate",
    3: "caudalmiddlefrontal",
    5: "cuneus",
    6: "entorhinal",
    7: "fusiform",
    8: "inferiorparietal",
    9: "inferiortemporal",
    10: "isthmuscingulate",
    11: "lateraloccipital",
    12: "lateralorbitofrontal",
    13: "lingual",
    14: "medialorbitofrontal",
    15: "middletemporal",
    16: "parahippocampal",
    17: "paracentral",
    18: "parsopercularis",
    19: "parsorbitalis",
    20: "parstriangularis",
    21: "pericalcarine",
    22: "postcentral",
    23: "posteriorcingulate",
    24: "precentral",
    25: "precuneus",
    26: "rostralanteriorcingulate",
    27: "rostralmiddlefrontal",
    28: "superiorfrontal",
    29: "superiorparietal",
    30: "superiortemporal",
    31: "supramarginal",
    34: "transversetemporal",
    35: "insula",
}


def named_region_table() -> dict[int, str]:
    """aseg subcortical ids plus DKT cortical ids (1000 + lh, 2000 + rh)."""
    table = dict(ASEG_REGIONS)
    for offset, hemi in ((1000, "lh"), (2000, "rh")):
        for i, name in DKT_PARCELS.items():
            table[offset + i] = f"ctx-{hemi}-{name}"
    return dict(sorted(table.items()))


def _intensity(name: str) -> float:
    if "Vent" in name or name == "CSF":
        return 0.15
    if name.startswith("ctx-"):
        return 0.55
    if "White-Matter" in name:
        return 0.9
    return 0.7


def named_regions_spec(noise_sigma: float = 0.0, seed: int = 0, cell: int = 4, box: int = 3) -> PhantomSpec:
    """One ``box``-sided cube per region on a lattice with ``cell`` spacing, 2-voxel margin."""
    table = named_region_table()
    n = len(table)
    per_axis = (5, 5, int(np.ceil(n / 25)))
    margin = 2
    dims = tuple(margin * 2 + k * cell for k in per_axis)
    regions = []
    for slot, (rid, name) in enumerate(table.items()):
        i, j, k = slot % per_axis[0], (slot // per_axis[0]) % per_axis[1], slot // (per_axis[0] * per_axis[1])
        start = (margin + i * cell, margin + j * cell, margin + k * cell)
        regions.append(RegionGeometry(rid, name, "box", start, (box, box, box), intensity=_intensity(name)))
    return PhantomSpec(dims, tuple(regions), noise_sigma, seed)

"""Metric-grid volume types and the three-class label vocabulary.

All dense volumes are numpy arrays of shape (nz, ny, nx) in C order, so the
flat element order is x-fastest, then y, then z. Linear voxel indices used
throughout the toolkit are flat indices into that layout:

    index = x + nx * (y + ny * z)

Volumes are frozen after construction (arrays are marked read-only) and are
safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from .errors import InvalidClassValue, MetaMismatch, NonFiniteValue, SimplexViolation

PROB_SIMPLEX_TOL = 1e-5


class ClassId(IntEnum):
    """Per-voxel tissue class. The encoding is the on-disk contract."""

    NORMAL = 0
    INDOLENT = 1
    AGGRESSIVE = 2


class ClassGroup(Enum):
    """Binary groupings of the cancer classes used for detection tasks."""

    CANCER_VS_ALL = "cancer"
    AGGRESSIVE_VS_ALL = "aggressive"
    INDOLENT_VS_ALL = "indolent"

    @property
    def classes(self) -> frozenset[ClassId]:
        return _GROUP_CLASSES[self]

    @classmethod
    def from_name(cls, name: str) -> "ClassGroup":
        for g in cls:
            if g.value == name:
                return g
        raise ValueError(f"unknown class group {name!r}")


_GROUP_CLASSES = {
    ClassGroup.CANCER_VS_ALL: frozenset({ClassId.INDOLENT, ClassId.AGGRESSIVE}),
    ClassGroup.AGGRESSIVE_VS_ALL: frozenset({ClassId.AGGRESSIVE}),
    ClassGroup.INDOLENT_VS_ALL: frozenset({ClassId.INDOLENT}),
}


class LabelSource(Enum):
    """Provenance of a label volume. Values double as file-name tags."""

    RAD = "rad"
    PATH = "path"
    DPATH_LESION = "dpathlesion"
    DPATH_PIXEL = "dpathpixel"

    @classmethod
    def from_tag(cls, tag: str) -> "LabelSource":
        for s in cls:
            if s.value == tag:
                return s
        raise ValueError(f"unknown label source {tag!r}")


@dataclass(frozen=True)
class GridMeta:
    """Voxel counts (nx, ny, nz) and spacing in mm per voxel (sx, sy, sz)."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        if len(dims) != 3 or len(spacing) != 3:
            raise ValueError("dims and spacing must have three entries")
        if any(d < 1 for d in dims):
            raise ValueError(f"all dims must be >= 1, got {dims}")
        if any(not np.isfinite(s) or s <= 0 for s in spacing):
            raise ValueError(f"all spacings must be positive and finite, got {spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)

    @property
    def nvoxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def shape_zyx(self) -> tuple[int, int, int]:
        """Array shape for the (nz, ny, nx) storage layout."""
        nx, ny, nz = self.dims
        return (nz, ny, nx)


def voxel_volume_mm3(meta: GridMeta) -> float:
    """Physical volume of one voxel in mm^3."""
    sx, sy, sz = meta.spacing
    return sx * sy * sz


def check_same_meta(a: GridMeta, b: GridMeta) -> None:
    if a != b:
        raise MetaMismatch(f"grid mismatch: {a} vs {b}")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LabelVolume:
    """Dense per-voxel ClassId map, stored as uint8 in (nz, ny, nx) order."""

    meta: GridMeta
    voxels: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.voxels, dtype=np.uint8).reshape(self.meta.shape_zyx)
        if v.max(initial=0) > 2:
            bad = int(v.max())
            raise InvalidClassValue(f"label voxel value {bad} outside {{0, 1, 2}}")
        object.__setattr__(self, "voxels", _freeze(v))

    def class_mask(self, classes) -> np.ndarray:
        """Boolean array of voxels whose class is in `classes` (or a ClassGroup)."""
        if isinstance(classes, ClassGroup):
            classes = classes.classes
        out = np.zeros(self.meta.shape_zyx, dtype=bool)
        for c in classes:
            out |= self.voxels == int(c)
        return out

    def __eq__(self, other):
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return self.meta == other.meta and np.array_equal(self.voxels, other.voxels)


@dataclass(frozen=True)
class MaskVolume:
    """Dense boolean region, stored as bool in (nz, ny, nx) order."""

    meta: GridMeta
    voxels: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.voxels, dtype=bool).reshape(self.meta.shape_zyx)
        object.__setattr__(self, "voxels", _freeze(v))

    def __eq__(self, other):
        if not isinstance(other, MaskVolume):
            return NotImplemented
        return self.meta == other.meta and np.array_equal(self.voxels, other.voxels)


@dataclass(frozen=True)
class ProbVolume:
    """Per-voxel (p_normal, p_indolent, p_aggressive) triples, float32.

    Stored as shape (nz, ny, nx, 3); each triple must lie on the probability
    simplex within PROB_SIMPLEX_TOL.
    """

    meta: GridMeta
    voxels: np.ndarray

    def __post_init__(self):
        nz, ny, nx = self.meta.shape_zyx
        v = np.asarray(self.voxels, dtype=np.float32).reshape(nz, ny, nx, 3)
        if not np.isfinite(v).all():
            raise NonFiniteValue("probability volume contains non-finite values")
        if v.min() < 0.0 or v.max() > 1.0:
            raise SimplexViolation("probabilities must lie in [0, 1]")
        # Sum in float64: the tolerance is about stored values, not the reduction.
        err = np.abs(v.sum(axis=-1, dtype=np.float64) - 1.0)
        if err.max() > PROB_SIMPLEX_TOL:
            raise SimplexViolation(
                f"probability triples deviate from the simplex by {err.max():.3g}"
            )
        object.__setattr__(self, "voxels", _freeze(v))

    def group_prob(self, group: ClassGroup) -> np.ndarray:
        """Summed probability of the group's classes, shape (nz, ny, nx)."""
        idx = sorted(int(c) for c in group.classes)
        return self.voxels[..., idx].sum(axis=-1)

    def argmax_class(self) -> np.ndarray:
        """Per-voxel class with maximal probability, as uint8."""
        return self.voxels.argmax(axis=-1).astype(np.uint8)

    def __eq__(self, other):
        if not isinstance(other, ProbVolume):
            return NotImplemented
        return self.meta == other.meta and np.array_equal(self.voxels, other.voxels)


@dataclass(frozen=True)
class IntensityVolume:
    """Dense scalar intensities (arbitrary units), float32."""

    meta: GridMeta
    voxels: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.voxels, dtype=np.float32).reshape(self.meta.shape_zyx)
        if not np.isfinite(v).all():
            raise NonFiniteValue("intensity volume contains non-finite values")
        object.__setattr__(self, "voxels", _freeze(v))

    def __eq__(self, other):
        if not isinstance(other, IntensityVolume):
            return NotImplemented
        return self.meta == other.meta and np.array_equal(self.voxels, other.voxels)


Volume = LabelVolume | MaskVolume | ProbVolume | IntensityVolume


@dataclass
class PatientCase:
    """One patient's volumes, all on a single grid.

    labels maps LabelSource to LabelVolume (any subset present); probs and
    intensities are optional named volumes (model outputs, image channels).
    """

    id: str
    mask: MaskVolume
    labels: dict[LabelSource, LabelVolume] = field(default_factory=dict)
    probs: dict[str, ProbVolume] = field(default_factory=dict)
    intensities: dict[str, IntensityVolume] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValueError("patient id must be nonempty")
        for vol in self.volumes():
            check_same_meta(self.mask.meta, vol.meta)

    @property
    def meta(self) -> GridMeta:
        return self.mask.meta

    def volumes(self):
        yield self.mask
        yield from self.labels.values()
        yield from self.probs.values()
        yield from self.intensities.values()

    def label(self, source: LabelSource) -> LabelVolume:
        from .errors import MissingLabelSource

        if source not in self.labels:
            raise MissingLabelSource(f"patient {self.id} has no {source.value} label")
        return self.labels[source]

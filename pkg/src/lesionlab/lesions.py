"""Lesion formation from pixel-level grade maps.

Pipeline: binarize by class group, morphological closing, connected
components, volume filter, then grade each surviving component by the
fraction of aggressive / indolent voxels it contains in the original
(pre-closing) grade map. A component is kept iff its physical volume is at
least min_volume_mm3 (inclusive at equality), and graded aggressive when at
least agg_threshold of its voxels are aggressive (inclusive), else indolent
by the same rule, else benign.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import EmptyLesion, OverlappingLesions
from .grid import ClassGroup, ClassId, GridMeta, LabelVolume, MaskVolume, voxel_volume_mm3
from .morphology import StructuringElement, build_structuring_element, close_array

DEFAULT_MIN_VOLUME_MM3 = 250.0
DEFAULT_CONNECTIVITY = 26
DEFAULT_GRADE_THRESHOLD = 0.01


class LesionGrade(Enum):
    BENIGN = "benign"
    INDOLENT = "indolent"
    AGGRESSIVE = "aggressive"

    @property
    def class_id(self) -> ClassId:
        return {
            LesionGrade.BENIGN: ClassId.NORMAL,
            LesionGrade.INDOLENT: ClassId.INDOLENT,
            LesionGrade.AGGRESSIVE: ClassId.AGGRESSIVE,
        }[self]

    def in_group(self, group: ClassGroup) -> bool:
        return self is not LesionGrade.BENIGN and self.class_id in group.classes


def connectivity_offsets(connectivity: int) -> np.ndarray:
    """Neighbor offsets (dz, dy, dx) for 6-, 18- or 26-connectivity."""
    if connectivity not in (6, 18, 26):
        raise ValueError(f"connectivity must be 6, 18 or 26, got {connectivity}")
    max_manhattan = {6: 1, 18: 2, 26: 3}[connectivity]
    offs = [
        (dz, dy, dx)
        for dz in (-1, 0, 1)
        for dy in (-1, 0, 1)
        for dx in (-1, 0, 1)
        if (dz, dy, dx) != (0, 0, 0)
        and abs(dz) + abs(dy) + abs(dx) <= max_manhattan
    ]
    return np.array(offs, dtype=np.int32)


def connected_components(
    mask: MaskVolume, connectivity: int = DEFAULT_CONNECTIVITY
) -> tuple[np.ndarray, int]:
    """Label foreground components 1..count in first-encounter scan order."""
    return _kernels.label_components(
        mask.voxels.astype(np.uint8), connectivity_offsets(connectivity)
    )


@dataclass(frozen=True)
class Lesion:
    """A connected voxel set with physical volume and grade.

    voxel_ids are sorted linear indices (x-fastest layout) into the grid.
    """

    voxel_ids: np.ndarray
    volume_mm3: float
    grade: LesionGrade
    agg_fraction: float
    ind_fraction: float

    def __post_init__(self):
        ids = np.asarray(self.voxel_ids, dtype=np.int64)
        if ids.size == 0:
            raise EmptyLesion("lesion voxel set is empty")
        ids = np.unique(ids)
        ids.flags.writeable = False
        object.__setattr__(self, "voxel_ids", ids)
        if self.agg_fraction + self.ind_fraction > 1.0 + 1e-12:
            raise ValueError("aggressive and indolent fractions sum above 1")

    @property
    def n_voxels(self) -> int:
        return int(self.voxel_ids.size)


@dataclass(frozen=True)
class LesionSet:
    lesions: tuple[Lesion, ...]
    meta: GridMeta
    min_volume_mm3: float

    def __post_init__(self):
        object.__setattr__(self, "lesions", tuple(self.lesions))
        for lesion in self.lesions:
            if lesion.volume_mm3 < self.min_volume_mm3:
                raise ValueError("lesion below the volume filter threshold")
        if self.lesions:
            all_ids = np.concatenate([l.voxel_ids for l in self.lesions])
            if np.unique(all_ids).size != all_ids.size:
                raise OverlappingLesions("lesions share voxels")

    def __len__(self) -> int:
        return len(self.lesions)

    def __iter__(self):
        return iter(self.lesions)


def grade_lesion(
    lesion_voxels: np.ndarray,
    grade_map: LabelVolume,
    agg_threshold: float = DEFAULT_GRADE_THRESHOLD,
    ind_threshold: float = DEFAULT_GRADE_THRESHOLD,
) -> tuple[LesionGrade, float, float]:
    """Grade a voxel set by its aggressive / indolent voxel fractions.

    Thresholds are inclusive: a fraction exactly at the threshold qualifies.
    Aggressive takes priority over indolent.
    """
    ids = np.asarray(lesion_voxels, dtype=np.int64)
    if ids.size == 0:
        raise EmptyLesion("cannot grade an empty voxel set")
    classes = grade_map.voxels.reshape(-1)[ids]
    agg_fraction = float(np.count_nonzero(classes == int(ClassId.AGGRESSIVE))) / ids.size
    ind_fraction = float(np.count_nonzero(classes == int(ClassId.INDOLENT))) / ids.size
    if agg_fraction >= agg_threshold:
        grade = LesionGrade.AGGRESSIVE
    elif ind_fraction >= ind_threshold:
        grade = LesionGrade.INDOLENT
    else:
        grade = LesionGrade.BENIGN
    return grade, agg_fraction, ind_fraction


def extract_lesions(
    labels: LabelVolume,
    group: ClassGroup = ClassGroup.CANCER_VS_ALL,
    se: StructuringElement | None = None,
    connectivity: int = DEFAULT_CONNECTIVITY,
    min_volume_mm3: float = DEFAULT_MIN_VOLUME_MM3,
    agg_threshold: float = DEFAULT_GRADE_THRESHOLD,
    ind_threshold: float = DEFAULT_GRADE_THRESHOLD,
) -> LesionSet:
    """Form graded 3D lesions from a pixel-level grade map."""
    meta = labels.meta
    if se is None:
        se = build_structuring_element(meta)
    fg = labels.class_mask(group)
    closed = close_array(fg, se)
    comp, count = _kernels.label_components(
        closed.astype(np.uint8), connectivity_offsets(connectivity)
    )
    vox_mm3 = voxel_volume_mm3(meta)
    comp_flat = comp.reshape(-1)
    fg = np.flatnonzero(comp_flat)
    cids = comp_flat[fg]
    order = np.argsort(cids, kind="stable")
    fg_sorted, cids_sorted = fg[order], cids[order]
    starts = np.searchsorted(cids_sorted, np.arange(1, count + 2))
    lesions = []
    for c in range(count):
        ids = fg_sorted[starts[c] : starts[c + 1]]
        volume = ids.size * vox_mm3
        if volume < min_volume_mm3:
            continue
        grade, agg_fraction, ind_fraction = grade_lesion(
            ids, labels, agg_threshold, ind_threshold
        )
        lesions.append(Lesion(ids, volume, grade, agg_fraction, ind_fraction))
    return LesionSet(tuple(lesions), meta, min_volume_mm3)


def lesionset_to_labelvolume(lesions: LesionSet, meta: GridMeta | None = None) -> LabelVolume:
    """Paint each lesion uniformly with its grade; benign lesions paint normal."""
    meta = meta or lesions.meta
    flat = np.zeros(meta.nvoxels, dtype=np.uint8)
    painted = np.zeros(meta.nvoxels, dtype=bool)
    for lesion in lesions:
        if painted[lesion.voxel_ids].any():
            raise OverlappingLesions("lesions share voxels")
        painted[lesion.voxel_ids] = True
        flat[lesion.voxel_ids] = int(lesion.grade.class_id)
    return LabelVolume(meta, flat.reshape(meta.shape_zyx))

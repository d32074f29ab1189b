"""Sextant partition of a prostate mask.

The mask splits into left/right halves at the x-centroid of its voxels, and
each half into base/mid/apex along z. The z zones are contiguous runs of the
slices that contain mask voxels, balanced to within one slice, with extra
slices going to base first, then mid. Region ids are side * 3 + zone with
side 0 = left (x below the centroid), zone 0/1/2 = base/mid/apex in
increasing z; 255 marks voxels outside the mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask
from .grid import GridMeta, MaskVolume

OUTSIDE = 255

SEXTANT_NAMES = (
    "left_base",
    "left_mid",
    "left_apex",
    "right_base",
    "right_mid",
    "right_apex",
)


@dataclass(frozen=True)
class SextantMap:
    meta: GridMeta
    region: np.ndarray  # uint8 (nz, ny, nx); 0..5 inside the mask, 255 outside

    def __post_init__(self):
        r = np.ascontiguousarray(self.region, dtype=np.uint8)
        r.flags.writeable = False
        object.__setattr__(self, "region", r)

    def region_voxels(self, region_id: int) -> np.ndarray:
        """Sorted linear indices of one region's voxels."""
        return np.flatnonzero(self.region.reshape(-1) == region_id)


def partition_sextants(mask: MaskVolume) -> SextantMap:
    m = mask.voxels
    if not m.any():
        raise EmptyMask("cannot partition an empty mask")
    nz, ny, nx = m.shape

    zs, ys, xs = np.nonzero(m)
    centroid_x = xs.mean()
    side = (xs >= centroid_x).astype(np.uint8)  # 0 left, 1 right

    slice_list = np.unique(zs)
    n = slice_list.size
    q, r = divmod(n, 3)
    sizes = (q + (1 if r >= 1 else 0), q + (1 if r >= 2 else 0), q)
    zone_of_slice = np.empty(n, dtype=np.uint8)
    zone_of_slice[: sizes[0]] = 0
    zone_of_slice[sizes[0] : sizes[0] + sizes[1]] = 1
    zone_of_slice[sizes[0] + sizes[1] :] = 2
    zone_lut = np.full(nz, OUTSIDE, dtype=np.uint8)
    zone_lut[slice_list] = zone_of_slice

    region = np.full((nz, ny, nx), OUTSIDE, dtype=np.uint8)
    region[zs, ys, xs] = side * 3 + zone_lut[zs]
    return SextantMap(mask.meta, region)

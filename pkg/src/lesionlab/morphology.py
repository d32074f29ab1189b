"""Structuring elements and binary morphology on metric grids.

The closing element mirrors a stack of three disks given by their physical
radii in mm; radii convert to voxel radii with round-half-away-from-zero of
r_mm / sx, so the element adapts to the grid spacing. Closing is computed on
a zero-padded copy of the grid (out-of-bounds is background), which makes it
extensive and idempotent on the stored region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import AnisotropicInPlaneSpacing
from .grid import GridMeta, MaskVolume

DEFAULT_DISK_RADII_MM = (0.5, 1.5, 0.5)


def mm_to_voxel_radius(r_mm: float, spacing_mm: float) -> int:
    """Voxel radius for a physical radius: round half away from zero."""
    return int(math.floor(r_mm / spacing_mm + 0.5))


def disk_offsets(r_vox: int, dz: int = 0) -> list[tuple[int, int, int]]:
    """Integer offsets (dz, dy, dx) of the disk dx^2 + dy^2 <= r_vox^2."""
    out = []
    for dy in range(-r_vox, r_vox + 1):
        for dx in range(-r_vox, r_vox + 1):
            if dx * dx + dy * dy <= r_vox * r_vox:
                out.append((dz, dy, dx))
    return out


@dataclass(frozen=True)
class StructuringElement:
    """A symmetric voxel-offset neighborhood containing the origin."""

    offsets: np.ndarray  # int32 (K, 3), rows (dz, dy, dx)
    radii_mm: tuple[float, ...]

    def __post_init__(self):
        offs = np.ascontiguousarray(self.offsets, dtype=np.int32)
        if offs.ndim != 2 or offs.shape[1] != 3:
            raise ValueError("offsets must be a (K, 3) table")
        rows = {tuple(int(v) for v in row) for row in offs}
        if len(rows) != offs.shape[0]:
            raise ValueError("duplicate offsets")
        if (0, 0, 0) not in rows:
            raise ValueError("structuring element must contain the origin")
        for row in rows:
            if (-row[0], -row[1], -row[2]) not in rows:
                raise ValueError(f"structuring element not symmetric: {row}")
        offs.flags.writeable = False
        object.__setattr__(self, "offsets", offs)
        object.__setattr__(self, "radii_mm", tuple(float(r) for r in self.radii_mm))

    @property
    def extent(self) -> tuple[int, int, int]:
        """Max |dz|, |dy|, |dx| over the offsets."""
        a = np.abs(self.offsets)
        return (int(a[:, 0].max()), int(a[:, 1].max()), int(a[:, 2].max()))

    def slice_offsets(self, dz: int) -> set[tuple[int, int]]:
        rows = self.offsets[self.offsets[:, 0] == dz]
        return {(int(r[1]), int(r[2])) for r in rows}


def build_structuring_element(
    meta: GridMeta,
    radii_mm: tuple[float, float, float] = DEFAULT_DISK_RADII_MM,
) -> StructuringElement:
    """Stacked-disk element: three disks on consecutive slices, middle radius
    at dz = 0. Requires isotropic in-plane spacing."""
    sx, sy, _ = meta.spacing
    if abs(sx - sy) > 1e-6:
        raise AnisotropicInPlaneSpacing(f"sx={sx} != sy={sy}")
    if any(r <= 0 for r in radii_mm):
        raise ValueError(f"disk radii must be positive, got {radii_mm}")
    r_vox = [mm_to_voxel_radius(r, sx) for r in radii_mm]
    if r_vox[0] != r_vox[2]:
        raise ValueError(
            f"outer disks must match for a symmetric element, got radii {r_vox}"
        )
    offsets = (
        disk_offsets(r_vox[0], dz=-1)
        + disk_offsets(r_vox[1], dz=0)
        + disk_offsets(r_vox[2], dz=+1)
    )
    return StructuringElement(np.array(offsets, dtype=np.int32), tuple(radii_mm))


def disk_element(meta: GridMeta, radius_mm: float) -> StructuringElement:
    """Single-slice in-plane disk element (used for in-plane erosion)."""
    sx, sy, _ = meta.spacing
    if abs(sx - sy) > 1e-6:
        raise AnisotropicInPlaneSpacing(f"sx={sx} != sy={sy}")
    r_vox = mm_to_voxel_radius(radius_mm, sx)
    return StructuringElement(
        np.array(disk_offsets(r_vox, dz=0), dtype=np.int32), (float(radius_mm),)
    )


def _padded(arr: np.ndarray, pad: tuple[int, int, int]) -> np.ndarray:
    pz, py, px = pad
    return np.pad(arr.astype(np.uint8), ((pz, pz), (py, py), (px, px)))


def _crop(arr: np.ndarray, pad: tuple[int, int, int]) -> np.ndarray:
    pz, py, px = pad
    nz, ny, nx = arr.shape
    return arr[pz : nz - pz or None, py : ny - py or None, px : nx - px or None]


def dilate_array(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Binary dilation of a bool array, out-of-bounds treated as background."""
    return _kernels.dilate(mask.astype(np.uint8), se.offsets).astype(bool)


def erode_array(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Binary erosion of a bool array, out-of-bounds treated as background."""
    return _kernels.erode(mask.astype(np.uint8), se.offsets).astype(bool)


def close_array(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Morphological closing (dilate then erode) of a bool array.

    Padding by the element extent keeps foreground that dilation pushes past
    the border, so the composition matches closing on an unbounded grid.
    """
    pad = se.extent
    padded = _padded(mask, pad)
    closed = _kernels.erode(_kernels.dilate(padded, se.offsets), se.offsets)
    return _crop(closed, pad).astype(bool)


def binary_close(mask: MaskVolume, se: StructuringElement) -> MaskVolume:
    """Closing of a mask volume; extensive and idempotent."""
    return MaskVolume(mask.meta, close_array(mask.voxels, se))

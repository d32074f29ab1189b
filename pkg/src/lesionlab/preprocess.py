"""Intensity standardization, z-score normalization, in-plane resample/crop.

Standardization learns a table of landmark values: each training volume's
intensity percentiles are affinely rescaled so the 1st percentile maps to 0
and the 99th to 100, then averaged across the cohort. Applying the table maps
a volume's own percentile values onto the learned ones piecewise-linearly,
extrapolating past the end landmarks along the end segments and clamping to
[-10, 110]. The construction is invariant to affine transforms of the input
intensities. Resampling touches only the in-plane axes; z spacing and slice
count are preserved.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateIntensities, IoFailure, MalformedHeader, ModeMismatch
from .grid import (
    GridMeta,
    IntensityVolume,
    LabelVolume,
    MaskVolume,
    ProbVolume,
    Volume,
)

DEFAULT_PERCENTILES = (1.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 99.0)
STANDARD_SCALE = 100.0
CLAMP_RANGE = (-10.0, 110.0)


@dataclass(frozen=True)
class LandmarkTable:
    percentiles: tuple[float, ...] = DEFAULT_PERCENTILES
    standard_values: tuple[float, ...] = ()

    def __post_init__(self):
        p = tuple(float(v) for v in self.percentiles)
        s = tuple(float(v) for v in self.standard_values)
        if len(p) < 2:
            raise ValueError("need at least two percentiles")
        if any(not 0.0 < v < 100.0 for v in p):
            raise ValueError("percentiles must lie strictly inside (0, 100)")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ValueError("percentiles must be strictly increasing")
        if s and len(s) != len(p):
            raise ValueError("standard_values length must match percentiles")
        if s and any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError("standard_values must be strictly increasing")
        object.__setattr__(self, "percentiles", p)
        object.__setattr__(self, "standard_values", s)


def _scoped_values(vol: IntensityVolume, mask: MaskVolume | None) -> np.ndarray:
    if mask is None:
        return vol.voxels.reshape(-1).astype(np.float64)
    if mask.meta != vol.meta:
        raise ValueError("mask grid differs from the volume grid")
    return vol.voxels[mask.voxels].astype(np.float64)


def _own_percentiles(
    vol: IntensityVolume, mask: MaskVolume | None, percentiles
) -> np.ndarray:
    vals = _scoped_values(vol, mask)
    if vals.size < 2 or vals.min() == vals.max():
        raise DegenerateIntensities(
            "volume needs at least two distinct intensities in scope"
        )
    return np.percentile(vals, percentiles)


def fit_landmarks(
    cohort: list[IntensityVolume],
    masks: list[MaskVolume] | None = None,
    percentiles=DEFAULT_PERCENTILES,
) -> LandmarkTable:
    """Average affinely-normalized percentile vectors over a cohort."""
    if not cohort:
        raise ValueError("cohort must be nonempty")
    if masks is not None and len(masks) != len(cohort):
        raise ValueError("one mask per volume required when masks are given")
    acc = np.zeros(len(percentiles), dtype=np.float64)
    for i, vol in enumerate(cohort):
        p = _own_percentiles(vol, masks[i] if masks else None, percentiles)
        lo, hi = p[0], p[-1]
        if hi <= lo:
            raise DegenerateIntensities("percentile range collapsed")
        acc += (p - lo) / (hi - lo) * STANDARD_SCALE
    standard = acc / len(cohort)
    if np.any(np.diff(standard) <= 0):
        raise DegenerateIntensities("averaged landmarks are not strictly increasing")
    return LandmarkTable(tuple(percentiles), tuple(standard))


def standardize(
    vol: IntensityVolume, lm: LandmarkTable, mask: MaskVolume | None = None
) -> IntensityVolume:
    """Piecewise-linear map of the volume's own percentile values onto the
    landmark values, linear beyond the end landmarks, clamped to [-10, 110]."""
    if not lm.standard_values:
        raise ValueError("landmark table has no standard values")
    own = _own_percentiles(vol, mask, lm.percentiles)
    if np.any(np.diff(own) <= 0):
        raise DegenerateIntensities("volume percentiles are not strictly increasing")
    std = np.asarray(lm.standard_values, dtype=np.float64)

    v = vol.voxels.astype(np.float64)
    out = np.interp(v, own, std)
    lo_slope = (std[1] - std[0]) / (own[1] - own[0])
    hi_slope = (std[-1] - std[-2]) / (own[-1] - own[-2])
    below = v < own[0]
    above = v > own[-1]
    out[below] = std[0] + (v[below] - own[0]) * lo_slope
    out[above] = std[-1] + (v[above] - own[-1]) * hi_slope
    np.clip(out, CLAMP_RANGE[0], CLAMP_RANGE[1], out=out)
    return IntensityVolume(vol.meta, out.astype(np.float32))


def zscore(vol: IntensityVolume, mask: MaskVolume | None = None) -> IntensityVolume:
    """Shift/scale so the scoped voxels have mean 0 and population std 1.

    Voxels outside the scope get the same affine transform.
    """
    vals = _scoped_values(vol, mask)
    if vals.size < 2 or vals.min() == vals.max():
        raise DegenerateIntensities("z-score needs two distinct values in scope")
    mean = vals.mean()
    std = vals.std()
    out = (vol.voxels.astype(np.float64) - mean) / std
    return IntensityVolume(vol.meta, out.astype(np.float32))


def _background_for(vol: Volume):
    if isinstance(vol, ProbVolume):
        return np.array([1.0, 0.0, 0.0], dtype=np.float64)
    return 0.0


def resample_crop(
    vol: Volume,
    target_spacing: tuple[float, float] = (0.29, 0.29),
    target_xy: tuple[int, int] = (224, 224),
    center: tuple[float, float] | None = None,
    mode: str = "linear",
) -> Volume:
    """In-plane resample about a center and crop/pad to a fixed XY size.

    center is (cx, cy) in input voxel coordinates (defaults to the grid
    center). Out-of-range samples read background (normal / false / 0.0).
    mode must be 'nearest' for label and mask volumes.
    """
    if mode not in ("linear", "nearest"):
        raise ValueError(f"mode must be linear or nearest, got {mode!r}")
    needs_nearest = isinstance(vol, (LabelVolume, MaskVolume))
    if needs_nearest and mode != "nearest":
        raise ModeMismatch(f"{type(vol).__name__} requires nearest-mode resampling")
    tx, ty = float(target_spacing[0]), float(target_spacing[1])
    if tx <= 0 or ty <= 0:
        raise ValueError("target spacing must be positive")
    wx, wy = int(target_xy[0]), int(target_xy[1])

    nx, ny, nz = vol.meta.dims
    sx, sy, sz = vol.meta.spacing
    cx, cy = center if center is not None else ((nx - 1) / 2.0, (ny - 1) / 2.0)

    # Output pixel i maps to input coordinate (i - (w-1)/2) * (t/s) + c.
    xi = (np.arange(wx) - (wx - 1) / 2.0) * (tx / sx) + cx
    yi = (np.arange(wy) - (wy - 1) / 2.0) * (ty / sy) + cy

    data = vol.voxels
    channelled = data.ndim == 4
    if not channelled:
        data = data[..., None]
    data = data.astype(np.float64)
    background = np.broadcast_to(
        np.atleast_1d(_background_for(vol)).astype(np.float64), (data.shape[-1],)
    )

    if mode == "nearest":
        ix = np.floor(xi + 0.5).astype(np.int64)
        iy = np.floor(yi + 0.5).astype(np.int64)
        ok_x = (ix >= 0) & (ix < nx)
        ok_y = (iy >= 0) & (iy < ny)
        out = np.empty((nz, wy, wx, data.shape[-1]), dtype=np.float64)
        out[...] = background
        gx = ix[ok_x]
        gy = iy[ok_y]
        sub = data[:, gy][:, :, gx]
        out[np.ix_(np.arange(nz), np.flatnonzero(ok_y), np.flatnonzero(ok_x))] = sub
    else:
        # Bilinear on an input padded with one background frame; coordinates
        # clipped into the padded range so fully-outside samples read background.
        padded = np.pad(data, ((0, 0), (1, 1), (1, 1), (0, 0)), constant_values=0.0)
        if np.any(background != 0.0):
            padded[:, 0, :, :] = background
            padded[:, -1, :, :] = background
            padded[:, :, 0, :] = background
            padded[:, :, -1, :] = background
        xq = np.clip(xi + 1.0, 0.0, nx + 1.0)
        yq = np.clip(yi + 1.0, 0.0, ny + 1.0)
        x0 = np.clip(np.floor(xq).astype(np.int64), 0, nx)
        y0 = np.clip(np.floor(yq).astype(np.int64), 0, ny)
        fx = xq - x0
        fy = yq - y0
        wy_, wx_ = np.meshgrid(fy, fx, indexing="ij")
        g00 = padded[:, y0][:, :, x0]
        g01 = padded[:, y0][:, :, x0 + 1]
        g10 = padded[:, y0 + 1][:, :, x0]
        g11 = padded[:, y0 + 1][:, :, x0 + 1]
        wx4 = wx_[None, :, :, None]
        wy4 = wy_[None, :, :, None]
        out = (
            g00 * (1 - wy4) * (1 - wx4)
            + g01 * (1 - wy4) * wx4
            + g10 * wy4 * (1 - wx4)
            + g11 * wy4 * wx4
        )

    new_meta = GridMeta((wx, wy, nz), (tx, ty, sz))
    if isinstance(vol, LabelVolume):
        return LabelVolume(new_meta, out[..., 0].astype(np.uint8))
    if isinstance(vol, MaskVolume):
        return MaskVolume(new_meta, out[..., 0] > 0.5)
    if isinstance(vol, ProbVolume):
        # Bilinear weights can overshoot [0, 1] by a few ulps.
        return ProbVolume(new_meta, np.clip(out, 0.0, 1.0).astype(np.float32))
    return IntensityVolume(new_meta, out[..., 0].astype(np.float32))


def save_landmarks(lm: LandmarkTable, path: str | os.PathLike) -> None:
    text = (
        "percentiles = " + " ".join(repr(v) for v in lm.percentiles) + "\n"
        "standard_values = " + " ".join(repr(v) for v in lm.standard_values) + "\n"
    )
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write landmark table: {exc}") from exc


def load_landmarks(path: str | os.PathLike) -> LandmarkTable:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read landmark table: {exc}") from exc
    fields: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value or key in fields:
            raise MalformedHeader(f"{path}: bad landmark line {line!r}")
        fields[key] = value
    if set(fields) != {"percentiles", "standard_values"}:
        raise MalformedHeader(f"{path}: expected percentiles and standard_values")
    return LandmarkTable(
        tuple(float(t) for t in fields["percentiles"].split()),
        tuple(float(t) for t in fields["standard_values"].split()),
    )

"""VGRID volume interchange format: a text header plus a raw little-endian dump.

Header (extension .vgh) is UTF-8 text of `key = value` lines, one per key:

    dims = 96 96 16
    spacing_mm = 0.5 0.5 3.0
    dtype = u8
    order = xyz
    byteorder = little
    data = case_mask.raw

dtype selects the volume kind: u8 -> LabelVolume, bool8 -> MaskVolume,
f32 -> IntensityVolume, f32x3 -> ProbVolume. The raw file is a dense dump in
x-fastest order; f32x3 stores 12 bytes per voxel as (normal, indolent,
aggressive). Round trips are byte-exact.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import (
    InvalidClassValue,
    IoFailure,
    MalformedHeader,
    NonFiniteValue,
    SizeMismatch,
)
from .grid import GridMeta, IntensityVolume, LabelVolume, MaskVolume, ProbVolume, Volume

HEADER_SUFFIX = ".vgh"
RAW_SUFFIX = ".raw"

_REQUIRED_KEYS = ("dims", "spacing_mm", "dtype", "order", "byteorder", "data")
_DTYPES = {"u8": 1, "bool8": 1, "f32": 4, "f32x3": 12}


def _parse_header(path: Path) -> dict[str, str]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read header {path}: {exc}") from exc
    fields: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedHeader(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise MalformedHeader(f"{path}:{lineno}: empty key or value")
        if key in fields:
            raise MalformedHeader(f"{path}:{lineno}: duplicate field {key!r}")
        if key not in _REQUIRED_KEYS:
            raise MalformedHeader(f"{path}:{lineno}: unknown field {key!r}")
        fields[key] = value
    missing = [k for k in _REQUIRED_KEYS if k not in fields]
    if missing:
        raise MalformedHeader(f"{path}: missing fields {missing}")
    return fields


def _parse_meta(fields: dict[str, str], path: Path) -> GridMeta:
    try:
        dims = tuple(int(t) for t in fields["dims"].split())
        spacing = tuple(float(t) for t in fields["spacing_mm"].split())
    except ValueError as exc:
        raise MalformedHeader(f"{path}: unparseable dims/spacing_mm: {exc}") from exc
    if len(dims) != 3 or len(spacing) != 3:
        raise MalformedHeader(f"{path}: dims and spacing_mm need three entries")
    try:
        return GridMeta(dims, spacing)
    except ValueError as exc:
        raise MalformedHeader(f"{path}: {exc}") from exc


def read_volume(header_path: str | os.PathLike) -> Volume:
    """Read a VGRID header + raw pair into the volume type its dtype names."""
    path = Path(header_path)
    fields = _parse_header(path)
    meta = _parse_meta(fields, path)

    dtype = fields["dtype"]
    if dtype not in _DTYPES:
        raise MalformedHeader(f"{path}: unknown dtype {dtype!r}")
    if fields["order"] != "xyz":
        raise MalformedHeader(f"{path}: order must be 'xyz', got {fields['order']!r}")
    if fields["byteorder"] != "little":
        raise MalformedHeader(
            f"{path}: byteorder must be 'little', got {fields['byteorder']!r}"
        )

    raw_path = path.parent / fields["data"]
    try:
        payload = raw_path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read raw file {raw_path}: {exc}") from exc

    expected = meta.nvoxels * _DTYPES[dtype]
    if len(payload) != expected:
        raise SizeMismatch(
            f"{raw_path}: raw length {len(payload)} != expected {expected} "
            f"({meta.nvoxels} voxels x {_DTYPES[dtype]} bytes)"
        )

    nz, ny, nx = meta.shape_zyx
    if dtype == "u8":
        arr = np.frombuffer(payload, dtype=np.uint8).reshape(nz, ny, nx)
        if arr.max(initial=0) > 2:
            raise InvalidClassValue(
                f"{raw_path}: label value {int(arr.max())} outside {{0, 1, 2}}"
            )
        return LabelVolume(meta, arr)
    if dtype == "bool8":
        arr = np.frombuffer(payload, dtype=np.uint8).reshape(nz, ny, nx)
        if arr.max(initial=0) > 1:
            raise InvalidClassValue(
                f"{raw_path}: bool value {int(arr.max())} outside {{0, 1}}"
            )
        return MaskVolume(meta, arr.astype(bool))
    if dtype == "f32":
        arr = np.frombuffer(payload, dtype="<f4").reshape(nz, ny, nx)
        if not np.isfinite(arr).all():
            raise NonFiniteValue(f"{raw_path}: non-finite intensity values")
        return IntensityVolume(meta, arr)
    # f32x3
    arr = np.frombuffer(payload, dtype="<f4").reshape(nz, ny, nx, 3)
    if not np.isfinite(arr).all():
        raise NonFiniteValue(f"{raw_path}: non-finite probability values")
    return ProbVolume(meta, arr)


def _dtype_of(volume: Volume) -> str:
    if isinstance(volume, LabelVolume):
        return "u8"
    if isinstance(volume, MaskVolume):
        return "bool8"
    if isinstance(volume, IntensityVolume):
        return "f32"
    if isinstance(volume, ProbVolume):
        return "f32x3"
    raise TypeError(f"not a volume: {type(volume).__name__}")


def _payload_of(volume: Volume) -> bytes:
    if isinstance(volume, MaskVolume):
        return volume.voxels.astype(np.uint8).tobytes()
    if isinstance(volume, LabelVolume):
        return volume.voxels.tobytes()
    return volume.voxels.astype("<f4", copy=False).tobytes()


def write_volume(volume: Volume, header_path: str | os.PathLike) -> None:
    """Write a volume as a VGRID header + raw pair.

    The raw file sits next to the header, named after the header stem.
    """
    path = Path(header_path)
    if path.suffix != HEADER_SUFFIX:
        path = path.with_suffix(HEADER_SUFFIX)
    raw_name = path.stem + RAW_SUFFIX
    nx, ny, nz = volume.meta.dims
    sx, sy, sz = volume.meta.spacing
    header = (
        f"dims = {nx} {ny} {nz}\n"
        f"spacing_mm = {sx!r} {sy!r} {sz!r}\n"
        f"dtype = {_dtype_of(volume)}\n"
        "order = xyz\n"
        "byteorder = little\n"
        f"data = {raw_name}\n"
    )
    try:
        path.write_text(header, encoding="utf-8")
        (path.parent / raw_name).write_bytes(_payload_of(volume))
    except OSError as exc:
        raise IoFailure(f"cannot write volume to {path}: {exc}") from exc

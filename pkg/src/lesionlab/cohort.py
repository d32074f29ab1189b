"""Cohort directory layout and manifest files.

A cohort directory holds per-patient VGRID pairs plus a manifest:

    manifest.txt                    key = value echo of the generating config
    p0000_mask.vgh / .raw           prostate segmentation
    p0000_label_<source>.vgh        label volumes (dpathpixel, dpathlesion, ...)
    p0000_int_<name>.vgh            intensity channels (t2w, adc)

Prediction directories follow the same naming with p0000_prob.vgh files.
"""

from __future__ import annotations

import os
from pathlib import Path


from .errors import IoFailure, MalformedHeader
from .grid import (
    IntensityVolume,
    LabelSource,
    LabelVolume,
    MaskVolume,
    PatientCase,
    ProbVolume,
)
from .vgrid import read_volume, write_volume

MANIFEST_NAME = "manifest.txt"


def write_manifest(path: str | os.PathLike, fields: dict[str, object]) -> None:
    lines = [f"{key} = {value}\n" for key, value in fields.items()]
    try:
        Path(path).write_text("".join(lines), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {path}: {exc}") from exc


def read_manifest(path: str | os.PathLike) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
    fields: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise MalformedHeader(f"{path}:{lineno}: expected 'key = value'")
        key, value = key.strip(), value.strip()
        if not key or key in fields:
            raise MalformedHeader(f"{path}:{lineno}: bad or duplicate key")
        fields[key] = value
    return fields


def write_case(case: PatientCase, cohort_dir: str | os.PathLike) -> None:
    d = Path(cohort_dir)
    write_volume(case.mask, d / f"{case.id}_mask.vgh")
    for source, label in sorted(case.labels.items(), key=lambda kv: kv[0].value):
        write_volume(label, d / f"{case.id}_label_{source.value}.vgh")
    for name, vol in sorted(case.intensities.items()):
        write_volume(vol, d / f"{case.id}_int_{name}.vgh")
    for name, vol in sorted(case.probs.items()):
        write_volume(vol, d / f"{case.id}_prob_{name}.vgh")


def list_patients(cohort_dir: str | os.PathLike) -> list[str]:
    d = Path(cohort_dir)
    pids = sorted(p.name[: -len("_mask.vgh")] for p in d.glob("*_mask.vgh"))
    if not pids:
        raise IoFailure(f"no patients found in {d}")
    return pids


def read_case(cohort_dir: str | os.PathLike, patient_id: str) -> PatientCase:
    d = Path(cohort_dir)
    mask = read_volume(d / f"{patient_id}_mask.vgh")
    if not isinstance(mask, MaskVolume):
        raise MalformedHeader(f"{patient_id}_mask.vgh is not a bool8 volume")
    labels: dict[LabelSource, LabelVolume] = {}
    for path in sorted(d.glob(f"{patient_id}_label_*.vgh")):
        tag = path.stem[len(patient_id) + len("_label_") :]
        vol = read_volume(path)
        if not isinstance(vol, LabelVolume):
            raise MalformedHeader(f"{path.name} is not a u8 label volume")
        labels[LabelSource.from_tag(tag)] = vol
    intensities: dict[str, IntensityVolume] = {}
    for path in sorted(d.glob(f"{patient_id}_int_*.vgh")):
        name = path.stem[len(patient_id) + len("_int_") :]
        vol = read_volume(path)
        if not isinstance(vol, IntensityVolume):
            raise MalformedHeader(f"{path.name} is not an f32 volume")
        intensities[name] = vol
    probs: dict[str, ProbVolume] = {}
    for path in sorted(d.glob(f"{patient_id}_prob_*.vgh")):
        name = path.stem[len(patient_id) + len("_prob_") :]
        vol = read_volume(path)
        if not isinstance(vol, ProbVolume):
            raise MalformedHeader(f"{path.name} is not an f32x3 volume")
        probs[name] = vol
    return PatientCase(
        id=patient_id, mask=mask, labels=labels, probs=probs, intensities=intensities
    )


def read_prediction(pred_dir: str | os.PathLike, patient_id: str) -> ProbVolume:
    path = Path(pred_dir) / f"{patient_id}_prob.vgh"
    vol = read_volume(path)
    if not isinstance(vol, ProbVolume):
        raise MalformedHeader(f"{path.name} is not an f32x3 volume")
    return vol

"""Sextant-based lesion-level evaluation and label-vs-label concordance.

Positive units are ground-truth lesions of the requested class group;
negative units are sextants containing no voxel of any in-group lesion.
Against probabilistic predictions a unit scores the maximum summed group
probability over its voxels (one confident voxel flags the region). Against
a second label volume (concordance) a unit scores the fraction of its voxels
the other labeling marks positive, a graded surrogate that keeps the AUC
meaningful between binary annotations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ClassGroup, LabelSource, LabelVolume, PatientCase, ProbVolume
from .errors import MetaMismatch
from .lesions import (
    DEFAULT_CONNECTIVITY,
    DEFAULT_GRADE_THRESHOLD,
    DEFAULT_MIN_VOLUME_MM3,
    LesionSet,
    extract_lesions,
)
from .metrics import (
    ConfusionCounts,
    EvalUnit,
    PatientMetrics,
    UnitKind,
    dice_arrays,
    lesion_confusion,
    lesion_roc_auc,
    sensitivity_specificity,
)
from .morphology import DEFAULT_DISK_RADII_MM, build_structuring_element
from .sextants import OUTSIDE, SextantMap, partition_sextants


@dataclass(frozen=True)
class PipelineParams:
    """Knobs of the lesion-extraction and scoring pipeline."""

    se_radii_mm: tuple[float, float, float] = DEFAULT_DISK_RADII_MM
    connectivity: int = DEFAULT_CONNECTIVITY
    min_volume_mm3: float = DEFAULT_MIN_VOLUME_MM3
    agg_threshold: float = DEFAULT_GRADE_THRESHOLD
    ind_threshold: float = DEFAULT_GRADE_THRESHOLD
    score_threshold: float = 0.5


def _in_group_lesions(gt_lesions: LesionSet, group: ClassGroup):
    return [l for l in gt_lesions if l.grade.in_group(group)]


def _negative_sextants(
    gt_lesions, sextants: SextantMap
) -> list[tuple[int, np.ndarray]]:
    """(region_id, voxel_ids) of sextants free of any given lesion's voxels."""
    region_flat = sextants.region.reshape(-1)
    has_lesion = np.zeros(6, dtype=bool)
    for lesion in gt_lesions:
        ids = region_flat[lesion.voxel_ids]
        has_lesion[ids[ids != OUTSIDE]] = True
    out = []
    for rid in range(6):
        if has_lesion[rid]:
            continue
        vox = sextants.region_voxels(rid)
        if vox.size:
            out.append((rid, vox))
    return out


def build_eval_units(
    gt_lesions: LesionSet,
    group: ClassGroup,
    sextants: SextantMap,
    probs: ProbVolume,
) -> list[EvalUnit]:
    """One positive unit per in-group lesion, one negative per cancer-free
    sextant, scored by the max group probability inside the unit."""
    if gt_lesions.meta != sextants.meta or gt_lesions.meta != probs.meta:
        raise MetaMismatch("lesions, sextants and probabilities must share a grid")
    score_map = probs.group_prob(group).reshape(-1)
    in_group = _in_group_lesions(gt_lesions, group)
    units = [
        EvalUnit(
            UnitKind.GT_LESION,
            lesion.voxel_ids,
            True,
            float(score_map[lesion.voxel_ids].max()),
        )
        for lesion in in_group
    ]
    for _, vox in _negative_sextants(in_group, sextants):
        units.append(
            EvalUnit(
                UnitKind.CANCER_FREE_SEXTANT, vox, False, float(score_map[vox].max())
            )
        )
    return units


def concordance(
    truth_volume: LabelVolume,
    truth_lesions: LesionSet,
    other: LabelVolume,
    group: ClassGroup,
    sextants: SextantMap,
) -> tuple[float, float | None]:
    """Dice and lesion AUC of a second labeling against reference lesions.

    Units score the fraction of their voxels the other labeling marks
    positive for the group.
    """
    if truth_volume.meta != other.meta:
        raise MetaMismatch("concordance volumes must share a grid")
    truth_bin = truth_volume.class_mask(group)
    other_bin = other.class_mask(group)
    dice = dice_arrays(truth_bin, other_bin)

    other_flat = other_bin.reshape(-1)
    in_group = _in_group_lesions(truth_lesions, group)
    units = [
        EvalUnit(
            UnitKind.GT_LESION,
            lesion.voxel_ids,
            True,
            float(other_flat[lesion.voxel_ids].mean()),
        )
        for lesion in in_group
    ]
    for _, vox in _negative_sextants(in_group, sextants):
        units.append(
            EvalUnit(
                UnitKind.CANCER_FREE_SEXTANT, vox, False, float(other_flat[vox].mean())
            )
        )
    return dice, lesion_roc_auc(units)


def evaluate_patient(
    case: PatientCase,
    truth_source: LabelSource,
    pred: ProbVolume,
    group: ClassGroup,
    params: PipelineParams = PipelineParams(),
) -> PatientMetrics:
    """Full per-patient evaluation of a prediction against one label source."""
    truth = case.label(truth_source)
    if pred.meta != case.meta:
        raise MetaMismatch("prediction grid differs from the case grid")
    se = build_structuring_element(case.meta, params.se_radii_mm)
    gt_lesions = extract_lesions(
        truth,
        group,
        se=se,
        connectivity=params.connectivity,
        min_volume_mm3=params.min_volume_mm3,
        agg_threshold=params.agg_threshold,
        ind_threshold=params.ind_threshold,
    )
    sextants = partition_sextants(case.mask)
    units = build_eval_units(gt_lesions, group, sextants, pred)

    auc = lesion_roc_auc(units)
    counts = lesion_confusion(units, params.score_threshold)
    sens, spec = sensitivity_specificity(counts)

    group_classes = np.array(sorted(int(c) for c in group.classes))
    pred_bin = np.isin(pred.argmax_class(), group_classes)
    dice = dice_arrays(truth.class_mask(group), pred_bin)

    n_pos = sum(1 for u in units if u.truth)
    return PatientMetrics(
        patient_id=case.id,
        group=group,
        dice=dice,
        auc=auc,
        sensitivity=sens,
        specificity=spec,
        counts=counts,
        n_gt_lesions=n_pos,
        n_negative_sextants=len(units) - n_pos,
    )

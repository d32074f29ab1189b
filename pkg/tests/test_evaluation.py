import numpy as np
import pytest

from lesionlab.errors import MetaMismatch
from lesionlab.evaluation import (
    PipelineParams,
    build_eval_units,
    concordance,
    evaluate_patient,
)
from lesionlab.grid import ClassGroup, ClassId, GridMeta, LabelSource, ProbVolume
from lesionlab.lesions import extract_lesions
from lesionlab.metrics import UnitKind, lesion_roc_auc
from lesionlab.sextants import partition_sextants
from lesionlab.synth import one_hot_predictions
from lesionlab.grid import LabelVolume, MaskVolume, PatientCase


def simple_case():
    """Box prostate spanning 12 slices with one aggressive blob lesion."""
    meta = GridMeta((40, 40, 14), (1.0, 1.0, 3.0))
    mask = np.zeros(meta.shape_zyx, dtype=bool)
    mask[1:13, 6:34, 6:34] = True
    labels = np.zeros(meta.shape_zyx, dtype=np.uint8)
    labels[2:4, 8:16, 8:16] = int(ClassId.AGGRESSIVE)  # left base corner
    return PatientCase(
        id="c1",
        mask=MaskVolume(meta, mask),
        labels={
            LabelSource.DPATH_PIXEL: LabelVolume(meta, labels),
            LabelSource.DPATH_LESION: LabelVolume(meta, labels),
        },
    )


def test_build_units_counts():
    case = simple_case()
    truth = case.labels[LabelSource.DPATH_LESION]
    lesions = extract_lesions(truth, ClassGroup.CANCER_VS_ALL, min_volume_mm3=100.0)
    assert len(lesions) == 1
    sextants = partition_sextants(case.mask)
    probs = one_hot_predictions(truth)
    units = build_eval_units(lesions, ClassGroup.CANCER_VS_ALL, sextants, probs)
    pos = [u for u in units if u.truth]
    neg = [u for u in units if not u.truth]
    assert len(pos) == 1
    assert len(neg) == 5  # the lesion touches exactly one sextant
    assert pos[0].score == 1.0
    assert all(u.score == 0.0 for u in neg)
    assert lesion_roc_auc(units) == 1.0


def test_build_units_cancer_free_patient():
    case = simple_case()
    meta = case.meta
    empty = LabelVolume(meta, np.zeros(meta.nvoxels, dtype=np.uint8))
    lesions = extract_lesions(empty, ClassGroup.CANCER_VS_ALL)
    sextants = partition_sextants(case.mask)
    units = build_eval_units(
        lesions, ClassGroup.CANCER_VS_ALL, sextants, one_hot_predictions(empty)
    )
    assert len(units) == 6
    assert all(not u.truth for u in units)
    assert all(u.kind is UnitKind.CANCER_FREE_SEXTANT for u in units)
    assert lesion_roc_auc(units) is None


def test_build_units_meta_mismatch():
    case = simple_case()
    truth = case.labels[LabelSource.DPATH_LESION]
    lesions = extract_lesions(truth, ClassGroup.CANCER_VS_ALL, min_volume_mm3=100.0)
    sextants = partition_sextants(case.mask)
    other = GridMeta((40, 40, 15), (1.0, 1.0, 3.0))
    bad = ProbVolume(
        other,
        np.stack(
            [
                np.ones(other.shape_zyx),
                np.zeros(other.shape_zyx),
                np.zeros(other.shape_zyx),
            ],
            axis=-1,
        ).astype(np.float32),
    )
    with pytest.raises(MetaMismatch):
        build_eval_units(lesions, ClassGroup.CANCER_VS_ALL, sextants, bad)


def test_concordance_self_is_perfect():
    case = simple_case()
    truth = case.labels[LabelSource.DPATH_LESION]
    lesions = extract_lesions(truth, ClassGroup.CANCER_VS_ALL, min_volume_mm3=100.0)
    sextants = partition_sextants(case.mask)
    dice, auc = concordance(truth, lesions, truth, ClassGroup.CANCER_VS_ALL, sextants)
    assert dice == 1.0
    assert auc == 1.0


def test_concordance_empty_other():
    case = simple_case()
    truth = case.labels[LabelSource.DPATH_LESION]
    lesions = extract_lesions(truth, ClassGroup.CANCER_VS_ALL, min_volume_mm3=100.0)
    sextants = partition_sextants(case.mask)
    empty = LabelVolume(case.meta, np.zeros(case.meta.nvoxels, dtype=np.uint8))
    dice, auc = concordance(truth, lesions, empty, ClassGroup.CANCER_VS_ALL, sextants)
    assert dice == 0.0
    assert auc == 0.5  # every unit scores 0: the tie convention


def test_concordance_partial_overlap_ranks_between():
    case = simple_case()
    truth = case.labels[LabelSource.DPATH_LESION]
    lesions = extract_lesions(truth, ClassGroup.CANCER_VS_ALL, min_volume_mm3=100.0)
    sextants = partition_sextants(case.mask)
    half = truth.voxels.copy()
    half[:3] = 0  # drop one annotated slice
    halved = LabelVolume(case.meta, half)
    dice, auc = concordance(truth, lesions, halved, ClassGroup.CANCER_VS_ALL, sextants)
    assert 0.0 < dice < 1.0
    assert auc == 1.0  # still ranks above the zero-scored sextants


def test_evaluate_patient_oracle():
    case = simple_case()
    pred = one_hot_predictions(case.labels[LabelSource.DPATH_LESION])
    params = PipelineParams(min_volume_mm3=100.0)
    row = evaluate_patient(
        case, LabelSource.DPATH_LESION, pred, ClassGroup.CANCER_VS_ALL, params
    )
    assert row.dice == 1.0
    assert row.auc == 1.0
    assert row.sensitivity == 1.0
    assert row.specificity == 1.0
    assert row.n_gt_lesions == 1
    assert row.n_negative_sextants == 5


def test_evaluate_patient_all_normal_predictions():
    case = simple_case()
    meta = case.meta
    flat = np.zeros((meta.nvoxels, 3), dtype=np.float32)
    flat[:, 0] = 1.0
    pred = ProbVolume(meta, flat)
    params = PipelineParams(min_volume_mm3=100.0)
    row = evaluate_patient(
        case, LabelSource.DPATH_LESION, pred, ClassGroup.CANCER_VS_ALL, params
    )
    assert row.sensitivity == 0.0
    assert row.specificity == 1.0
    assert row.dice == 0.0


def test_evaluate_patient_missing_source():
    case = simple_case()
    pred = one_hot_predictions(case.labels[LabelSource.DPATH_LESION])
    from lesionlab.errors import MissingLabelSource

    with pytest.raises(MissingLabelSource):
        evaluate_patient(case, LabelSource.RAD, pred, ClassGroup.CANCER_VS_ALL)


def test_evaluate_patient_group_selects_lesions():
    case = simple_case()
    # indolent-only prediction volume scores zero for the aggressive group
    pred = one_hot_predictions(case.labels[LabelSource.DPATH_LESION])
    params = PipelineParams(min_volume_mm3=100.0)
    row = evaluate_patient(
        case, LabelSource.DPATH_LESION, pred, ClassGroup.INDOLENT_VS_ALL, params
    )
    assert row.n_gt_lesions == 0  # the lesion is aggressive
    assert row.auc is None
    assert row.sensitivity is None

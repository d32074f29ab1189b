import numpy as np
import pytest

from lesionlab.evaluation import PipelineParams
from lesionlab.grid import ClassGroup, ClassId, GridMeta, LabelSource, LabelVolume
from lesionlab.lesions import extract_lesions
from lesionlab.synth import (
    CHANNEL_NAMES,
    DegradationSpec,
    PhantomSpec,
    derive_dpath_lesion,
    gaussian_blur,
    generate_phantom,
    one_hot_predictions,
    simulate_pathologist,
    simulate_predictions,
    simulate_radiologist,
)

PARAMS = PipelineParams()


def test_generation_deterministic():
    spec = PhantomSpec(master_seed=11, n_patients=2)
    a = generate_phantom(spec, 0)
    b = generate_phantom(spec, 0)
    assert a.mask == b.mask
    assert a.labels[LabelSource.DPATH_PIXEL] == b.labels[LabelSource.DPATH_PIXEL]
    for name in CHANNEL_NAMES:
        assert a.intensities[name] == b.intensities[name]


def test_patients_differ():
    spec = PhantomSpec(master_seed=11, n_patients=10)
    vols = [generate_phantom(spec, i).labels[LabelSource.DPATH_PIXEL] for i in range(10)]
    assert any(vols[0] != v for v in vols[1:])


def test_lesions_inside_prostate(cohort42):
    for case in cohort42[:10]:
        cancer = case.labels[LabelSource.DPATH_PIXEL].voxels > 0
        assert not (cancer & ~case.mask.voxels).any()


def test_seed_changes_output():
    a = generate_phantom(PhantomSpec(master_seed=1), 0)
    b = generate_phantom(PhantomSpec(master_seed=2), 0)
    assert a.labels[LabelSource.DPATH_PIXEL] != b.labels[LabelSource.DPATH_PIXEL]


def test_spec_validation():
    with pytest.raises(ValueError):
        PhantomSpec(n_patients=0)
    with pytest.raises(ValueError):
        PhantomSpec(lesion_radius_mm=(5.0, 4.0))
    with pytest.raises(ValueError):
        DegradationSpec(miss_prob=1.5)
    with pytest.raises(ValueError):
        DegradationSpec(erosion_mm=-1.0)


def hand_case(agg_fraction, n_x=30):
    """A single rectangular lesion with a controlled aggressive fraction."""
    meta = GridMeta((60, 60, 8), (1.0, 1.0, 3.0))
    mask = np.zeros(meta.shape_zyx, dtype=bool)
    mask[1:7, 5:55, 5:55] = True
    labels = np.zeros(meta.shape_zyx, dtype=np.uint8)
    labels[3:5, 20:40, 20 : 20 + n_x] = int(ClassId.INDOLENT)
    n_total = 2 * 20 * n_x
    n_agg = int(round(agg_fraction * n_total))
    flat_ids = np.flatnonzero(labels.reshape(-1) == int(ClassId.INDOLENT))[:n_agg]
    flat = labels.reshape(-1)
    flat[flat_ids] = int(ClassId.AGGRESSIVE)
    from lesionlab.grid import MaskVolume, PatientCase

    return PatientCase(
        id="hand",
        mask=MaskVolume(meta, mask),
        labels={LabelSource.DPATH_PIXEL: LabelVolume(meta, flat.reshape(meta.shape_zyx))},
    )


def test_derive_dpath_lesion_grades_mixed_lesion():
    case = hand_case(0.40)
    out = derive_dpath_lesion(case, PARAMS)
    cancer = case.labels[LabelSource.DPATH_PIXEL].voxels > 0
    assert (out.voxels[cancer] == int(ClassId.AGGRESSIVE)).all()


def test_derive_dpath_lesion_pure_indolent():
    case = hand_case(0.0)
    out = derive_dpath_lesion(case, PARAMS)
    cancer = case.labels[LabelSource.DPATH_PIXEL].voxels > 0
    assert (out.voxels[cancer] == int(ClassId.INDOLENT)).all()


def test_derive_dpath_lesion_drops_speck():
    meta = GridMeta((60, 60, 8), (1.0, 1.0, 3.0))
    mask = np.zeros(meta.shape_zyx, dtype=bool)
    mask[1:7, 5:55, 5:55] = True
    labels = np.zeros(meta.shape_zyx, dtype=np.uint8)
    labels[3, 10:14, 10:14] = int(ClassId.AGGRESSIVE)  # 48 mm3 speck
    from lesionlab.grid import MaskVolume, PatientCase

    case = PatientCase(
        id="speck",
        mask=MaskVolume(meta, mask),
        labels={LabelSource.DPATH_PIXEL: LabelVolume(meta, labels)},
    )
    out = derive_dpath_lesion(case, PARAMS)
    assert not out.voxels.any()


def with_dpath_lesion(case):
    case.labels[LabelSource.DPATH_LESION] = derive_dpath_lesion(case, PARAMS)
    return case


def test_pathologist_identity_limit(cohort42):
    case = cohort42[0]
    out = simulate_pathologist(
        case, DegradationSpec(slice_keep_prob=1.0), 42, 0, PARAMS
    )
    assert out == case.labels[LabelSource.DPATH_LESION]


def test_pathologist_keeps_one_slice_per_lesion(cohort42):
    dspec = DegradationSpec(slice_keep_prob=0.05)
    for idx in (0, 1, 2):
        case = cohort42[idx]
        out = simulate_pathologist(case, dspec, 42, idx, PARAMS)
        src_lesions = extract_lesions(
            case.labels[LabelSource.DPATH_LESION], ClassGroup.CANCER_VS_ALL
        )
        out_flat = out.voxels.reshape(-1)
        for lesion in src_lesions:
            assert (out_flat[lesion.voxel_ids] > 0).any()


def test_pathologist_retained_fraction_statistic(cohort42):
    dspec = DegradationSpec(slice_keep_prob=0.6)
    kept, total = 0, 0
    for idx, case in enumerate(cohort42):
        out = simulate_pathologist(case, dspec, 42, idx, PARAMS)
        kept += int((out.voxels > 0).sum())
        total += int((case.labels[LabelSource.DPATH_LESION].voxels > 0).sum())
    assert 0.5 <= kept / total <= 0.7


def test_pathologist_is_subset(cohort42):
    dspec = DegradationSpec()
    case = cohort42[3]
    out = simulate_pathologist(case, dspec, 42, 3, PARAMS)
    src = case.labels[LabelSource.DPATH_LESION].voxels
    changed = out.voxels != src
    assert (out.voxels[changed] == 0).all()  # only removals


def test_radiologist_identity_limit(cohort42):
    case = cohort42[0]
    out = simulate_radiologist(
        case, DegradationSpec(miss_prob=0.0, erosion_mm=0.0), 42, 0, PARAMS
    )
    assert out == case.labels[LabelSource.DPATH_LESION]


def test_radiologist_erosion_shrinks_every_lesion(cohort42):
    dspec = DegradationSpec(miss_prob=0.0, erosion_mm=1.0)
    case = cohort42[1]
    out = simulate_radiologist(case, dspec, 42, 1, PARAMS)
    src_lesions = extract_lesions(
        case.labels[LabelSource.DPATH_LESION], ClassGroup.CANCER_VS_ALL
    )
    out_flat = out.voxels.reshape(-1)
    for lesion in src_lesions:
        n_kept = int((out_flat[lesion.voxel_ids] > 0).sum())
        assert 0 < n_kept < lesion.n_voxels


def test_radiologist_is_subset(cohort42):
    dspec = DegradationSpec()
    case = cohort42[5]
    out = simulate_radiologist(case, dspec, 42, 5, PARAMS)
    src = case.labels[LabelSource.DPATH_LESION].voxels
    changed = out.voxels != src
    assert (out.voxels[changed] == 0).all()


def test_simulators_deterministic(cohort42):
    case = cohort42[2]
    dspec = DegradationSpec()
    a = simulate_radiologist(case, dspec, 42, 2, PARAMS)
    b = simulate_radiologist(case, dspec, 42, 2, PARAMS)
    assert a == b
    c = simulate_predictions(case, dspec, 42, 2, PARAMS)
    d = simulate_predictions(case, dspec, 42, 2, PARAMS)
    assert c == d


def test_predictions_identity_limit(cohort42):
    case = cohort42[0]
    out = simulate_predictions(case, DegradationSpec.identity(), 42, 0, PARAMS)
    assert out == one_hot_predictions(case.labels[LabelSource.DPATH_PIXEL])


def test_predictions_simplex_and_containment(cohort42):
    case = cohort42[1]
    out = simulate_predictions(case, DegradationSpec(), 42, 1, PARAMS)
    sums = out.voxels.sum(axis=-1, dtype=np.float64)
    assert np.abs(sums - 1.0).max() <= 1e-5
    cancer_pred = out.argmax_class() > 0
    assert not (cancer_pred & ~case.mask.voxels).any()


def test_gaussian_blur_axis_handling():
    arr = np.zeros((9, 9, 9))
    arr[4, 4, 4] = 1.0
    out = gaussian_blur(arr, (0.0, 1.0, 1.0))
    assert out[4, 4, 4] < 1.0
    assert out[3, 4, 4] == 0.0  # z untouched
    assert out[4, 3, 4] > 0.0
    assert out.sum() == pytest.approx(1.0, abs=1e-9)  # full kernel in bounds


def test_one_hot_predictions_matches_classes():
    meta = GridMeta((2, 2, 1), (1, 1, 1))
    vol = LabelVolume(meta, np.array([0, 1, 2, 0], dtype=np.uint8))
    probs = one_hot_predictions(vol)
    assert np.array_equal(probs.argmax_class(), vol.voxels)
    assert probs.voxels.max() == 1.0 and probs.voxels.min() == 0.0

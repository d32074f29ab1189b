"""Seeded synthetic phantom cohorts and label/prediction degradation.

A phantom patient is an ellipsoidal prostate containing one or more
ellipsoidal lesions, each split into spatially coherent aggressive and
indolent sub-regions, plus two intensity channels whose contrast depends on
the voxel class. Degradation simulators emulate the weaknesses of the human
annotation sources: the pathologist analog drops whole annotation slices
(keeping at least one per lesion), the radiologist analog misses whole
lesions and erodes the survivors in-plane, and the prediction simulator blurs
and perturbs the one-hot ground truth.

Every operation is a pure function of (master_seed, patient_index, spec):
each (patient, operation) pair draws from its own RNG stream, so cohorts
generate identically regardless of scheduling or cohort size.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import SpecInfeasible
from .evaluation import PipelineParams
from .grid import (
    ClassGroup,
    ClassId,
    GridMeta,
    IntensityVolume,
    LabelSource,
    LabelVolume,
    MaskVolume,
    PatientCase,
    ProbVolume,
)
from .lesions import LesionSet, extract_lesions, lesionset_to_labelvolume
from .morphology import (
    build_structuring_element,
    dilate_array,
    disk_element,
    disk_offsets,
    erode_array,
)

CHANNEL_NAMES = ("t2w", "adc")

DEFAULT_GRID = GridMeta((96, 96, 16), (0.5, 0.5, 3.0))

# Class severity drives lesion contrast: aggressive darker than indolent.
_SEVERITY = {int(ClassId.INDOLENT): 0.6, int(ClassId.AGGRESSIVE): 1.0}


@dataclass(frozen=True)
class PhantomSpec:
    master_seed: int = 42
    n_patients: int = 1
    grid: GridMeta = DEFAULT_GRID
    prostate_semiaxes_mm: tuple[tuple[float, float], ...] = (
        (14.0, 20.0),
        (12.0, 18.0),
        (14.0, 20.0),
    )
    lesions_per_patient: tuple[int, int] = (1, 3)
    lesion_radius_mm: tuple[float, float] = (4.0, 9.0)
    aggressive_fraction: tuple[float, float] = (0.0, 1.0)
    lesion_contrast: tuple[float, float] = (0.35, 0.5)
    tissue_intensity: float = 100.0
    background_intensity: float = 40.0
    intensity_noise: float = 4.0

    def __post_init__(self):
        if self.n_patients < 1:
            raise ValueError("n_patients must be >= 1")
        for lo, hi in (
            *self.prostate_semiaxes_mm,
            self.lesion_radius_mm,
        ):
            if lo <= 0 or hi < lo:
                raise ValueError("ranges must be positive and nonempty")
        lo, hi = self.lesions_per_patient
        if lo < 0 or hi < lo:
            raise ValueError("lesions_per_patient range is empty")


@dataclass(frozen=True)
class DegradationSpec:
    miss_prob: float = 0.15
    erosion_mm: float = 1.0
    slice_keep_prob: float = 0.6
    fp_rate: float = 0.5
    blur_mm: float = 1.5
    noise_sigma: float = 0.05

    def __post_init__(self):
        for p in (self.miss_prob, self.slice_keep_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        for r in (self.erosion_mm, self.fp_rate, self.blur_mm, self.noise_sigma):
            if r < 0:
                raise ValueError("rates and radii must be nonnegative")

    @classmethod
    def identity(cls) -> "DegradationSpec":
        return cls(0.0, 0.0, 1.0, 0.0, 0.0, 0.0)


def _stream(master_seed: int, patient_index: int, op_name: str) -> np.random.Generator:
    """Independent RNG stream per (seed, patient, operation)."""
    op_key = zlib.crc32(op_name.encode("ascii"))
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(patient_index), op_key])
    )


def _coords_mm(meta: GridMeta):
    nx, ny, nz = meta.dims
    sx, sy, sz = meta.spacing
    x = (np.arange(nx) * sx)[None, None, :]
    y = (np.arange(ny) * sy)[None, :, None]
    z = (np.arange(nz) * sz)[:, None, None]
    return x, y, z


def _ellipsoid(meta: GridMeta, center_mm, semiaxes_mm) -> np.ndarray:
    x, y, z = _coords_mm(meta)
    cx, cy, cz = center_mm
    ax, ay, az = semiaxes_mm
    return (
        ((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2 + ((z - cz) / az) ** 2
    ) <= 1.0


def _lesion_blob(meta: GridMeta, center_mm, semiaxes_mm) -> np.ndarray:
    """Lesion shape: ellipse in-plane, quartic (flattened) profile along z."""
    x, y, z = _coords_mm(meta)
    cx, cy, cz = center_mm
    ax, ay, az = semiaxes_mm
    return (
        ((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2 + ((z - cz) / az) ** 4
    ) <= 1.0


def _lesion_blob_offsets(spacing_mm, semiaxes_mm, zshift_mm: float) -> np.ndarray:
    """Voxel offsets (dz, dy, dx) of the lesion shape about a voxel, for a
    shape center displaced by zshift_mm along z."""
    sx, sy, sz = spacing_mm
    ax, ay, az = semiaxes_mm
    rx, ry = int(ax / sx), int(ay / sy)
    rz = int((az + abs(zshift_mm)) / sz) + 1
    dz, dy, dx = np.mgrid[-rz : rz + 1, -ry : ry + 1, -rx : rx + 1]
    inside = (
        (dx * sx / ax) ** 2
        + (dy * sy / ay) ** 2
        + ((dz * sz - zshift_mm) / az) ** 4
    ) <= 1.0
    return np.stack([dz[inside], dy[inside], dx[inside]], axis=1).astype(np.int32)


def generate_phantom(spec: PhantomSpec, patient_index: int) -> PatientCase:
    """Deterministic phantom for (spec.master_seed, patient_index)."""
    rng = _stream(spec.master_seed, patient_index, "phantom")
    meta = spec.grid
    nx, ny, nz = meta.dims
    sx, sy, sz = meta.spacing

    gcx = (nx - 1) / 2.0 * sx + rng.uniform(-2.0, 2.0)
    gcy = (ny - 1) / 2.0 * sy + rng.uniform(-2.0, 2.0)
    gcz = (nz - 1) / 2.0 * sz + rng.uniform(-0.5, 0.5) * sz
    pax = rng.uniform(*spec.prostate_semiaxes_mm[0])
    pay = rng.uniform(*spec.prostate_semiaxes_mm[1])
    paz = rng.uniform(*spec.prostate_semiaxes_mm[2])
    prostate = _ellipsoid(meta, (gcx, gcy, gcz), (pax, pay, paz))

    # Per-axis normalized distances from the prostate center: a lesion
    # with semi-axes l fits inside the prostate around any center where
    # sum_i (|c_i - g_i| / p_i + l_i / p_i)^2 <= 1.
    x, y, z = _coords_mm(meta)
    nxd = np.abs(x - gcx) / pax
    nyd = np.abs(y - gcy) / pay
    nzd = np.abs(z - gcz) / paz

    labels = np.zeros((nz, ny, nx), dtype=np.uint8)
    occupied = np.zeros((nz, ny, nx), dtype=bool)
    closing_se = build_structuring_element(meta)

    lo, hi = spec.lesions_per_patient
    n_lesions = int(rng.integers(lo, hi + 1))
    r_lo, r_hi = spec.lesion_radius_mm
    radii = sorted(
        (float(rng.uniform(r_lo, r_hi)) for _ in range(n_lesions)), reverse=True
    )
    # Multi-lesion patients must pack side by side in-plane (the gland is
    # only a few slices tall), so shrink their radii to an area budget.
    if len(radii) >= 2:
        area_cap = 0.55 * np.pi * pax * pay
        need = sum(np.pi * (1.3 * r + 2.0) ** 2 for r in radii)
        if need > area_cap:
            factor = (area_cap / need) ** 0.5
            radii = [max(r_lo, r * factor) for r in radii]

    # Closing can fuse two blobs only when they are close in both xy and z.
    # Blobs sharing or adjoining slices need the full closing-diameter xy
    # gap; blobs one or two slices removed only a small one; farther apart
    # in z they are free. Placements that cannot satisfy the gap are skipped
    # rather than crowded in, so phantom lesions never merge.
    placed: list[tuple[np.ndarray, float]] = []  # (2D footprint, z center mm)
    gap_strict = np.array(disk_offsets(7), dtype=np.int32)
    gap_loose = np.array(disk_offsets(4), dtype=np.int32)
    slice_z = np.arange(nz) * sz
    for r_target in radii:
        for attempt in range(100):
            # Later attempts shrink toward the minimum radius.
            r = r_lo + (r_target - r_lo) * max(0.0, 1.0 - attempt / 50.0)
            lax = r * rng.uniform(1.2, 1.55)
            lay = r * rng.uniform(1.2, 1.55)
            laz = rng.uniform(2.6, 3.8)
            # Off-lattice z center: lesions straddle two slices.
            zshift = rng.uniform(0.35, 0.65) * sz
            fits = (
                (nxd + lax / pax) ** 2
                + (nyd + lay / pay) ** 2
                + (nzd + (laz + zshift) / paz) ** 2
            ) <= 1.0
            if not fits.any():
                continue
            shape = _lesion_blob_offsets((sx, sy, sz), (lax, lay, laz), zshift)
            shape_2d = np.unique(shape[:, 1:], axis=0)
            shape_2d = np.concatenate(
                [np.zeros((len(shape_2d), 1), dtype=np.int32), shape_2d], axis=1
            )
            forbidden = np.zeros((nz, ny, nx), dtype=bool)
            for fp, zc in placed:
                swept = _kernels.dilate(fp, shape_2d)
                fxy_strict = _kernels.dilate(swept, gap_strict).astype(bool)[0]
                fxy_loose = _kernels.dilate(swept, gap_loose).astype(bool)[0]
                dz_c = np.abs(slice_z + zshift - zc)
                strict_z = dz_c < 2.7 * sz
                loose_z = (dz_c >= 2.7 * sz) & (dz_c < 4.4 * sz)
                forbidden |= strict_z[:, None, None] & fxy_strict[None, :, :]
                forbidden |= loose_z[:, None, None] & fxy_loose[None, :, :]
            candidates = np.argwhere(fits & ~forbidden)
            if len(candidates) == 0:
                continue
            pick = candidates[int(rng.integers(0, len(candidates)))]
            center = np.array([pick[2] * sx, pick[1] * sy, pick[0] * sz + zshift])
            lesion = _lesion_blob(meta, center, (lax, lay, laz))
            if (lesion & ~prostate).any() or (lesion & occupied).any():
                continue
            break
        else:
            if placed:
                continue  # crowded gland: settle for fewer lesions
            raise SpecInfeasible(
                f"could not place lesion inside the prostate after 100 attempts "
                f"(patient {patient_index})"
            )
        occupied |= lesion
        placed.append((lesion.any(axis=0)[None].astype(np.uint8), float(center[2])))

        frac = rng.uniform(*spec.aggressive_fraction)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        vz, vy, vx = np.nonzero(lesion)
        pos = np.stack([vx * sx, vy * sy, vz * sz], axis=1) - center
        proj = pos @ direction
        k = int(round(frac * proj.size))
        order = np.argsort(proj, kind="stable")
        lesion_class = np.full(proj.size, int(ClassId.INDOLENT), dtype=np.uint8)
        lesion_class[order[:k]] = int(ClassId.AGGRESSIVE)
        labels[vz, vy, vx] = lesion_class

    severity = np.zeros((nz, ny, nx), dtype=np.float64)
    for cls, sev in _SEVERITY.items():
        severity[labels == cls] = sev
    intensities = {}
    base = np.where(prostate, spec.tissue_intensity, spec.background_intensity)
    for contrast, name in zip(spec.lesion_contrast, CHANNEL_NAMES):
        img = base * (1.0 - contrast * severity)
        img = img + rng.normal(0.0, spec.intensity_noise, size=img.shape)
        intensities[name] = IntensityVolume(meta, img.astype(np.float32))

    return PatientCase(
        id=f"p{patient_index:04d}",
        mask=MaskVolume(meta, prostate),
        labels={LabelSource.DPATH_PIXEL: LabelVolume(meta, labels)},
        intensities=intensities,
    )


def _source_lesions(case: PatientCase, source: LabelSource, params: PipelineParams) -> LesionSet:
    label = case.label(source)
    se = build_structuring_element(case.meta, params.se_radii_mm)
    return extract_lesions(
        label,
        ClassGroup.CANCER_VS_ALL,
        se=se,
        connectivity=params.connectivity,
        min_volume_mm3=params.min_volume_mm3,
        agg_threshold=params.agg_threshold,
        ind_threshold=params.ind_threshold,
    )


def derive_dpath_lesion(
    case: PatientCase, params: PipelineParams = PipelineParams()
) -> LabelVolume:
    """Lesion-level rendering of the pixel grade map (closing, components,
    volume filter, 1% grading rule, uniform paint)."""
    lesions = _source_lesions(case, LabelSource.DPATH_PIXEL, params)
    return lesionset_to_labelvolume(lesions, case.meta)


def simulate_pathologist(
    case: PatientCase,
    dspec: DegradationSpec,
    master_seed: int,
    patient_index: int,
    params: PipelineParams = PipelineParams(),
) -> LabelVolume:
    """Per lesion, keep each annotated slice with slice_keep_prob; at least
    one slice (the largest) survives per lesion."""
    rng = _stream(master_seed, patient_index, "pathologist")
    src = case.label(LabelSource.DPATH_LESION)
    lesions = _source_lesions(case, LabelSource.DPATH_LESION, params)
    nx, ny, _ = case.meta.dims
    plane = nx * ny
    src_flat = src.voxels.reshape(-1)
    out = np.zeros(case.meta.nvoxels, dtype=np.uint8)
    for lesion in lesions:
        zs = lesion.voxel_ids // plane
        uniq_z, counts = np.unique(zs, return_counts=True)
        keep = rng.random(uniq_z.size) < dspec.slice_keep_prob
        if not keep.any():
            keep[int(np.argmax(counts))] = True
        sel = np.isin(zs, uniq_z[keep])
        ids = lesion.voxel_ids[sel]
        out[ids] = src_flat[ids]
    return LabelVolume(case.meta, out.reshape(case.meta.shape_zyx))


def simulate_radiologist(
    case: PatientCase,
    dspec: DegradationSpec,
    master_seed: int,
    patient_index: int,
    params: PipelineParams = PipelineParams(),
) -> LabelVolume:
    """Drop whole lesions with miss_prob; erode survivors in-plane."""
    rng = _stream(master_seed, patient_index, "radiologist")
    src = case.label(LabelSource.DPATH_LESION)
    lesions = _source_lesions(case, LabelSource.DPATH_LESION, params)
    disk = disk_element(case.meta, dspec.erosion_mm)
    erosion_active = disk.offsets.shape[0] > 1
    src_flat = src.voxels.reshape(-1)
    out = np.zeros(case.meta.nvoxels, dtype=np.uint8)
    for lesion in lesions:
        if rng.random() < dspec.miss_prob:
            continue
        ids = lesion.voxel_ids
        if erosion_active:
            sub = np.zeros(case.meta.nvoxels, dtype=bool)
            sub[ids] = True
            eroded = erode_array(sub.reshape(case.meta.shape_zyx), disk)
            ids = np.flatnonzero(eroded.reshape(-1))
        out[ids] = src_flat[ids]
    return LabelVolume(case.meta, out.reshape(case.meta.shape_zyx))


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(np.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def _shift_axis(arr: np.ndarray, axis: int, d: int) -> np.ndarray:
    """out[..., j, ...] = arr[..., j + d, ...] along axis, zero fill."""
    if d == 0:
        return arr
    n = arr.shape[axis]
    out = np.zeros_like(arr)
    lo, hi = max(0, -d), min(n, n - d)
    if lo >= hi:
        return out
    dst = [slice(None)] * arr.ndim
    src = [slice(None)] * arr.ndim
    dst[axis] = slice(lo, hi)
    src[axis] = slice(lo + d, hi + d)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def gaussian_blur(arr: np.ndarray, sigmas_vox) -> np.ndarray:
    """Separable Gaussian blur with per-axis sigmas (in voxels), zero-padded."""
    out = arr.astype(np.float64)
    for axis, sigma in enumerate(sigmas_vox):
        if sigma <= 0:
            continue
        k = _gaussian_kernel(sigma)
        radius = k.size // 2
        acc = np.zeros_like(out)
        for i, w in enumerate(k):
            acc += w * _shift_axis(out, axis, i - radius)
        out = acc
    return out


def one_hot_predictions(label: LabelVolume) -> ProbVolume:
    """Oracle predictions: probability 1 on the true class of every voxel."""
    eye = np.eye(3, dtype=np.float32)
    return ProbVolume(label.meta, eye[label.voxels])


def simulate_predictions(
    case: PatientCase,
    dspec: DegradationSpec,
    master_seed: int,
    patient_index: int,
    params: PipelineParams = PipelineParams(),
) -> ProbVolume:
    """Imperfect-model stand-in: blurred, noisy one-hot ground truth with
    missed lesions and injected false-positive blobs, renormalized per voxel.

    With all degradation parameters at identity the output is exactly the
    one-hot encoding of the pixel grade map.
    """
    rng = _stream(master_seed, patient_index, "predictions")
    meta = case.meta
    pix = case.label(LabelSource.DPATH_PIXEL)
    sx, sy, sz = meta.spacing
    probs = np.eye(3, dtype=np.float64)[pix.voxels]

    if dspec.blur_mm > 0:
        sigmas = (dspec.blur_mm / sz, dspec.blur_mm / sy, dspec.blur_mm / sx)
        for c in range(3):
            probs[..., c] = gaussian_blur(probs[..., c], sigmas)

    if dspec.noise_sigma > 0:
        probs += rng.normal(0.0, dspec.noise_sigma, size=probs.shape)
        np.clip(probs, 0.0, 1.0, out=probs)

    if dspec.miss_prob > 0:
        flat = probs.reshape(-1, 3)
        for lesion in _source_lesions(case, LabelSource.DPATH_PIXEL, params):
            if rng.random() < dspec.miss_prob:
                flat[lesion.voxel_ids, 1:] = 0.0

    if dspec.fp_rate > 0:
        mask_idx = np.argwhere(case.mask.voxels)
        n_blobs = int(rng.poisson(dspec.fp_rate))
        for _ in range(n_blobs):
            pick = mask_idx[rng.integers(0, len(mask_idx))]
            center = (pick[2] * sx, pick[1] * sy, pick[0] * sz)
            r = rng.uniform(3.0, 6.0)
            blob = _ellipsoid(meta, center, (r, r, max(r, 1.05 * sz)))
            blob &= case.mask.voxels
            cls = int(ClassId.AGGRESSIVE) if rng.random() < 0.5 else int(ClassId.INDOLENT)
            strength = rng.uniform(0.7, 0.95)
            probs[..., cls][blob] = np.maximum(probs[..., cls][blob], strength)

    sums = probs.sum(axis=-1, keepdims=True)
    dead = sums[..., 0] <= 0.0
    probs[dead] = (1.0, 0.0, 0.0)
    sums[dead[..., None]] = 1.0
    probs /= sums
    probs[~case.mask.voxels] = (1.0, 0.0, 0.0)
    return ProbVolume(meta, probs.astype(np.float32))

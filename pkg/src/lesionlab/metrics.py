"""Pixel Dice, lesion-level ROC-AUC, confusion counts and cohort aggregation.

The lesion ROC-AUC follows the pairwise (Mann-Whitney) definition over
evaluation units: positives are ground-truth lesions, negatives cancer-free
sextants; a tied pair contributes 0.5. It is computed from average ranks,
which equals the pairwise enumeration exactly. Metrics that have no defined
value (e.g. AUC with a single class) are reported as None and excluded from
cohort means; cohort spread is the sample (n-1) standard deviation, zero for
a single patient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EmptyCohort, MetaMismatch
from .grid import ClassGroup, MaskVolume

METRIC_NAMES = ("dice", "auc", "sensitivity", "specificity")


def dice_arrays(a: np.ndarray, b: np.ndarray) -> float:
    """2|A n B| / (|A| + |B|) on boolean arrays; 1.0 when both are empty."""
    na = int(np.count_nonzero(a))
    nb = int(np.count_nonzero(b))
    if na + nb == 0:
        return 1.0
    inter = int(np.count_nonzero(a & b))
    return 2.0 * inter / (na + nb)


def pixel_dice(a: MaskVolume, b: MaskVolume) -> float:
    if a.meta != b.meta:
        raise MetaMismatch(f"dice on mismatched grids: {a.meta} vs {b.meta}")
    return dice_arrays(a.voxels, b.voxels)


class UnitKind(Enum):
    GT_LESION = "gt_lesion"
    CANCER_FREE_SEXTANT = "cancer_free_sextant"


@dataclass(frozen=True)
class EvalUnit:
    """One scored unit of the sextant-based lesion-level evaluation."""

    kind: UnitKind
    voxel_ids: np.ndarray
    truth: bool
    score: float

    def __post_init__(self):
        ids = np.asarray(self.voxel_ids, dtype=np.int64)
        if ids.size == 0:
            raise ValueError("evaluation unit has no voxels")
        ids.flags.writeable = False
        object.__setattr__(self, "voxel_ids", ids)
        if not np.isfinite(self.score):
            raise ValueError(f"unit score must be finite, got {self.score}")


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties averaged."""
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts
    avg = (starts + 1 + ends) / 2.0
    return avg[inverse]


def lesion_roc_auc(units: list[EvalUnit]) -> float | None:
    """Pairwise ranking AUC of unit scores; None when either class is absent."""
    if not units:
        return None
    scores = np.array([u.score for u in units], dtype=np.float64)
    truth = np.array([u.truth for u in units], dtype=bool)
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(scores)
    rank_sum = float(ranks[truth].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")


def lesion_confusion(units: list[EvalUnit], threshold: float = 0.5) -> ConfusionCounts:
    """Threshold unit scores: score >= threshold counts as detected."""
    tp = fp = tn = fn = 0
    for u in units:
        hit = u.score >= threshold
        if u.truth:
            tp, fn = tp + hit, fn + (not hit)
        else:
            fp, tn = fp + hit, tn + (not hit)
    return ConfusionCounts(tp, fp, tn, fn)


def sensitivity_specificity(c: ConfusionCounts) -> tuple[float | None, float | None]:
    sens = c.tp / (c.tp + c.fn) if c.tp + c.fn else None
    spec = c.tn / (c.tn + c.fp) if c.tn + c.fp else None
    return sens, spec


@dataclass(frozen=True)
class PatientMetrics:
    """Per-patient metric row; None marks an undefined metric."""

    patient_id: str
    group: ClassGroup
    dice: float | None
    auc: float | None
    sensitivity: float | None
    specificity: float | None
    counts: ConfusionCounts
    n_gt_lesions: int
    n_negative_sextants: int

    def metric(self, name: str) -> float | None:
        return getattr(self, name)


@dataclass(frozen=True)
class CohortStat:
    mean: float | None
    std: float | None
    n_defined: int
    n_undefined: int


@dataclass(frozen=True)
class MetricsReport:
    per_patient: tuple[PatientMetrics, ...]
    cohort: dict[str, CohortStat] = field(default_factory=dict)


def aggregate(rows: list[PatientMetrics]) -> MetricsReport:
    """Cohort mean and sample std per metric over patients with defined values."""
    if not rows:
        raise EmptyCohort("no patient rows to aggregate")
    rows = tuple(sorted(rows, key=lambda r: (r.patient_id, r.group.value)))
    cohort: dict[str, CohortStat] = {}
    for name in METRIC_NAMES:
        values = [r.metric(name) for r in rows]
        defined = np.array([v for v in values if v is not None], dtype=np.float64)
        n_undef = len(values) - defined.size
        if defined.size == 0:
            cohort[name] = CohortStat(None, None, 0, n_undef)
            continue
        mean = float(defined.mean())
        std = float(defined.std(ddof=1)) if defined.size > 1 else 0.0
        cohort[name] = CohortStat(mean, std, int(defined.size), n_undef)
    return MetricsReport(rows, cohort)

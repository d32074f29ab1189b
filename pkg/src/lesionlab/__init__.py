"""lesionlab: volumetric label processing and lesion-level evaluation.

Turns pixel-level three-class grade maps into graded 3D lesions (closing,
connected components, volume filter, 1% grading rule) and scores detection
output with sextant-based lesion-level metrics (ROC-AUC, sensitivity,
specificity, Dice), alongside MRI-style intensity standardization and a
seeded synthetic phantom cohort generator.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .errors import LesionLabError
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
    voxel_volume_mm3,
)
from .vgrid import read_volume, write_volume
from .morphology import (
    StructuringElement,
    binary_close,
    build_structuring_element,
    disk_element,
)
from .lesions import (
    Lesion,
    LesionGrade,
    LesionSet,
    connected_components,
    extract_lesions,
    grade_lesion,
    lesionset_to_labelvolume,
)
from .sextants import SEXTANT_NAMES, SextantMap, partition_sextants
from .metrics import (
    ConfusionCounts,
    EvalUnit,
    MetricsReport,
    PatientMetrics,
    aggregate,
    lesion_confusion,
    lesion_roc_auc,
    pixel_dice,
    sensitivity_specificity,
)
from .evaluation import (
    PipelineParams,
    build_eval_units,
    concordance,
    evaluate_patient,
)
from .preprocess import (
    LandmarkTable,
    fit_landmarks,
    resample_crop,
    standardize,
    zscore,
)
from .synth import (
    DegradationSpec,
    PhantomSpec,
    derive_dpath_lesion,
    generate_phantom,
    one_hot_predictions,
    simulate_pathologist,
    simulate_predictions,
    simulate_radiologist,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

"""Exception types raised across the toolkit."""


class LesionLabError(Exception):
    """Base class for all toolkit errors."""


class MalformedHeader(LesionLabError):
    """Volume header is missing a field, repeats a field, or fails to parse."""


class SizeMismatch(LesionLabError):
    """Raw payload length does not match dims times element size."""


class InvalidClassValue(LesionLabError):
    """A label voxel is outside {0, 1, 2} or a bool voxel outside {0, 1}."""


class NonFiniteValue(LesionLabError):
    """An intensity or probability voxel is NaN or infinite."""


class SimplexViolation(LesionLabError):
    """A probability triple does not sum to 1 within tolerance."""


class IoFailure(LesionLabError):
    """Underlying filesystem write or read failed."""


class MetaMismatch(LesionLabError):
    """Two volumes expected on the same grid have different GridMeta."""


class AnisotropicInPlaneSpacing(LesionLabError):
    """Structuring element requested on a grid with sx != sy."""


class EmptyLesion(LesionLabError):
    """Lesion grading requested for an empty voxel set."""


class OverlappingLesions(LesionLabError):
    """Lesions expected to be voxel-disjoint share voxels."""


class EmptyMask(LesionLabError):
    """Operation requires a nonempty mask."""


class MissingLabelSource(LesionLabError):
    """Requested label source absent from the patient case."""


class EmptyCohort(LesionLabError):
    """Aggregation requested over zero rows."""


class DegenerateIntensities(LesionLabError):
    """Intensity statistics undefined (constant volume or too few voxels)."""


class ModeMismatch(LesionLabError):
    """Linear interpolation requested for a label or mask volume."""


class SpecInfeasible(LesionLabError):
    """Phantom generation could not satisfy the spec (e.g. lesion placement)."""

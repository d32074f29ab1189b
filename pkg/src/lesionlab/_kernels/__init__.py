"""Kernel backend selection.

The compiled Cython kernels are used when the extension was built; otherwise
the NumPy fallback takes over. LESION_HARNESS_BACKEND=numpy|compiled forces a
backend (compiled raises if the extension is unavailable). Both backends are
contract-identical; see benchmarks/bench_kernels.py for the speed comparison.
"""

from __future__ import annotations

import os

_requested = os.environ.get("LESION_HARNESS_BACKEND", "auto")
if _requested not in ("auto", "compiled", "numpy"):
    raise ImportError(
        f"LESION_HARNESS_BACKEND must be auto, compiled or numpy, got {_requested!r}"
    )

if _requested == "numpy":
    from . import _numpy as _impl
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _numpy as _impl

BACKEND = _impl.BACKEND_NAME
dilate = _impl.dilate
erode = _impl.erode
label_components = _impl.label_components

#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times binary closing and connected-component labeling on phantom-scale and
paper-scale grids, plus the end-to-end lesion extraction. Run from the repo
root after building the extension in place:

    python3 setup.py build_ext --inplace
    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from lesionlab._kernels import _numpy

try:
    from lesionlab._kernels import _fast
except ImportError:
    _fast = None

from lesionlab.grid import GridMeta
from lesionlab.lesions import connectivity_offsets
from lesionlab.morphology import build_structuring_element


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def closing(backend, mask, se):
    pad = se.extent
    padded = np.pad(mask, ((pad[0],) * 2, (pad[1],) * 2, (pad[2],) * 2))
    backend.erode(backend.dilate(padded, se.offsets), se.offsets)


def make_mask(meta, rng, fill=0.08):
    nz, ny, nx = meta.shape_zyx
    n_blobs = 4
    arr = np.zeros((nz, ny, nx), dtype=np.uint8)
    z, y, x = np.mgrid[0:nz, 0:ny, 0:nx]
    for _ in range(n_blobs):
        cz, cy, cx = rng.uniform(0.2, 0.8, 3) * (nz, ny, nx)
        r = rng.uniform(0.08, 0.18) * min(ny, nx)
        arr |= (
            ((x - cx) / r) ** 2 + ((y - cy) / r) ** 2 + ((z - cz) / (r / 3)) ** 2 <= 1
        ).astype(np.uint8)
    return arr


def main():
    rng = np.random.default_rng(0)
    grids = {
        "phantom 96x96x16 @0.5mm": GridMeta((96, 96, 16), (0.5, 0.5, 3.0)),
        "paper 224x224x32 @0.29mm": GridMeta((224, 224, 32), (0.29, 0.29, 3.0)),
    }
    backends = {"numpy": _numpy}
    if _fast is not None:
        backends["compiled"] = _fast
    else:
        print("compiled kernels not built; benchmarking the fallback only")

    header = f"{'case':<42}" + "".join(f"{name:>12}" for name in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for grid_name, meta in grids.items():
        mask = make_mask(meta, rng)
        se = build_structuring_element(meta)
        offs26 = connectivity_offsets(26)
        cases = {
            f"closing ({grid_name})": lambda b, m=mask, s=se: closing(b, m, s),
            f"components ({grid_name})": lambda b, m=mask: b.label_components(m, offs26),
        }
        for case_name, fn in cases.items():
            times = {name: timeit(lambda b=b: fn(b)) for name, b in backends.items()}
            row = f"{case_name:<42}"
            for name in backends:
                row += f"{times[name] * 1e3:>10.1f}ms"
            if len(backends) == 2:
                row += f"{times['numpy'] / times['compiled']:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()

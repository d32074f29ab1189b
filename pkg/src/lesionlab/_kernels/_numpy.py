"""Pure-NumPy kernels for binary morphology and connected-component labeling.

These are the fallback implementations; the compiled module in _fast.pyx
provides the same contracts. All functions take a uint8 array of shape
(nz, ny, nx) and an int32 offset table of shape (K, 3) with rows (dz, dy, dx).

Semantics (shared contract, checked by the backend-equality tests):
  dilate(m)[v] = 1 iff some offset s has v+s in bounds and m[v+s] == 1
  erode(m)[v]  = 1 iff every offset s has v+s in bounds and m[v+s] == 1
  label_components assigns ids 1..count in first-encounter flat-scan order
  (x fastest, then y, then z); background stays 0.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def _shifted(m: np.ndarray, off, fill: bool) -> np.ndarray:
    """Array s.t. out[v] = m[v + off], with `fill` outside the grid."""
    out = np.full(m.shape, fill, dtype=bool)
    src, dst = [], []
    for n, d in zip(m.shape, off):
        lo, hi = max(0, -int(d)), min(n, n - int(d))
        if lo >= hi:
            return out
        dst.append(slice(lo, hi))
        src.append(slice(lo + int(d), hi + int(d)))
    out[tuple(dst)] = m[tuple(src)]
    return out


def dilate(mask: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    m = mask.astype(bool, copy=False)
    out = np.zeros(m.shape, dtype=bool)
    for off in np.asarray(offsets):
        out |= _shifted(m, off, False)
    return out.astype(np.uint8)


def erode(mask: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    m = mask.astype(bool, copy=False)
    out = np.ones(m.shape, dtype=bool)
    for off in np.asarray(offsets):
        out &= _shifted(m, off, False)
    return out.astype(np.uint8)


def label_components(mask: np.ndarray, offsets: np.ndarray) -> tuple[np.ndarray, int]:
    nz, ny, nx = mask.shape
    flat = mask.reshape(-1).astype(bool)
    labels = np.zeros(mask.size, dtype=np.int32)
    offs = np.asarray(offsets, dtype=np.int64)
    count = 0
    for seed in np.flatnonzero(flat):
        if labels[seed]:
            continue
        count += 1
        labels[seed] = count
        frontier = np.array([seed], dtype=np.int64)
        while frontier.size:
            z, rem = np.divmod(frontier, ny * nx)
            y, x = np.divmod(rem, nx)
            zz = z[:, None] + offs[None, :, 0]
            yy = y[:, None] + offs[None, :, 1]
            xx = x[:, None] + offs[None, :, 2]
            ok = (
                (zz >= 0) & (zz < nz)
                & (yy >= 0) & (yy < ny)
                & (xx >= 0) & (xx < nx)
            )
            nbr = np.unique(((zz * ny + yy) * nx + xx)[ok])
            nbr = nbr[flat[nbr] & (labels[nbr] == 0)]
            labels[nbr] = count
            frontier = nbr
    return labels.reshape(mask.shape), count

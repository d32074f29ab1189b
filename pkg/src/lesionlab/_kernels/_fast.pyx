# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for binary morphology and connected-component labeling.

Contract-identical to _numpy.py; see that module for the semantics.
"""

import numpy as np

cimport numpy as cnp

BACKEND_NAME = "compiled"


def dilate(mask, offsets):
    cdef const cnp.uint8_t[:, :, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef const cnp.int32_t[:, ::1] offs = np.ascontiguousarray(offsets, dtype=np.int32)
    cdef Py_ssize_t nz = m.shape[0], ny = m.shape[1], nx = m.shape[2]
    cdef Py_ssize_t nk = offs.shape[0]
    out_arr = np.zeros((nz, ny, nx), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, ::1] out = out_arr
    cdef Py_ssize_t z, y, x, k, zz, yy, xx
    # Scatter: a foreground voxel u makes out[u - s] foreground for every s,
    # which matches out[v] = any_s m[v + s].
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if m[z, y, x]:
                    for k in range(nk):
                        zz = z - offs[k, 0]
                        yy = y - offs[k, 1]
                        xx = x - offs[k, 2]
                        if 0 <= zz < nz and 0 <= yy < ny and 0 <= xx < nx:
                            out[zz, yy, xx] = 1
    return out_arr


def erode(mask, offsets):
    cdef const cnp.uint8_t[:, :, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef const cnp.int32_t[:, ::1] offs = np.ascontiguousarray(offsets, dtype=np.int32)
    cdef Py_ssize_t nz = m.shape[0], ny = m.shape[1], nx = m.shape[2]
    cdef Py_ssize_t nk = offs.shape[0]
    out_arr = np.zeros((nz, ny, nx), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, ::1] out = out_arr
    cdef Py_ssize_t z, y, x, k, zz, yy, xx
    cdef bint has_origin = False, keep
    for k in range(nk):
        if offs[k, 0] == 0 and offs[k, 1] == 0 and offs[k, 2] == 0:
            has_origin = True
            break
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if has_origin and not m[z, y, x]:
                    continue
                keep = True
                for k in range(nk):
                    zz = z + offs[k, 0]
                    yy = y + offs[k, 1]
                    xx = x + offs[k, 2]
                    if zz < 0 or zz >= nz or yy < 0 or yy >= ny or xx < 0 or xx >= nx:
                        keep = False
                        break
                    if not m[zz, yy, xx]:
                        keep = False
                        break
                if keep:
                    out[z, y, x] = 1
    return out_arr


def label_components(mask, offsets):
    cdef const cnp.uint8_t[:, :, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef const cnp.int32_t[:, ::1] offs = np.ascontiguousarray(offsets, dtype=np.int32)
    cdef Py_ssize_t nz = m.shape[0], ny = m.shape[1], nx = m.shape[2]
    cdef Py_ssize_t nk = offs.shape[0]
    cdef Py_ssize_t nvox = nz * ny * nx
    labels_arr = np.zeros((nz, ny, nx), dtype=np.int32)
    cdef cnp.int32_t[:, :, ::1] labels = labels_arr
    stack_arr = np.empty(nvox, dtype=np.int64)
    cdef cnp.int64_t[::1] stack = stack_arr
    cdef Py_ssize_t top, z, y, x, k, zz, yy, xx, az, ay, ax, idx
    cdef cnp.int32_t count = 0
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if not m[z, y, x] or labels[z, y, x]:
                    continue
                count += 1
                labels[z, y, x] = count
                stack[0] = (z * ny + y) * nx + x
                top = 1
                while top > 0:
                    top -= 1
                    idx = stack[top]
                    zz = idx // (ny * nx)
                    yy = (idx // nx) % ny
                    xx = idx % nx
                    for k in range(nk):
                        az = zz + offs[k, 0]
                        ay = yy + offs[k, 1]
                        ax = xx + offs[k, 2]
                        if az < 0 or az >= nz or ay < 0 or ay >= ny or ax < 0 or ax >= nx:
                            continue
                        if m[az, ay, ax] and labels[az, ay, ax] == 0:
                            labels[az, ay, ax] = count
                            stack[top] = (az * ny + ay) * nx + ax
                            top += 1
    return labels_arr, int(count)

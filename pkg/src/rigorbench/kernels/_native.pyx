# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Mirrors pyops.py exactly; see that module for semantics.

Float expressions keep the same evaluation order as the NumPy path and the
build uses plain -O3 (no fast-math, no -march=native) so results stay
bit-identical between backends.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long x)


def box_downsample_sums(luma, int out_h, int out_w):
    cdef cnp.ndarray[cnp.int64_t, ndim=2, mode="c"] src = \
        np.ascontiguousarray(luma, dtype=np.int64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    if out_h <= 0 or out_w <= 0 or h <= 0 or w <= 0:
        raise ValueError("downsample dimensions must be positive")
    cdef cnp.ndarray[cnp.int64_t, ndim=2, mode="c"] out = \
        np.zeros((out_h, out_w), dtype=np.int64)
    cdef Py_ssize_t x, y, r, c, c_end, r_end
    cdef long long cell_lo, cell_hi, px_lo, px_hi, py_lo, py_hi, lo, hi, wx, wy
    for y in range(h):
        # pixel interval in y, scaled by out_h; cell r spans [r*h, (r+1)*h)
        py_lo = y * out_h
        py_hi = py_lo + out_h
        for x in range(w):
            px_lo = x * out_w
            px_hi = px_lo + out_w
            c_end = min((px_hi + w - 1) // w, <long long>out_w)
            for c in range(px_lo // w, c_end):
                cell_lo = c * w
                cell_hi = cell_lo + w
                lo = px_lo if px_lo > cell_lo else cell_lo
                hi = px_hi if px_hi < cell_hi else cell_hi
                if hi <= lo:
                    continue
                wx = hi - lo
                r_end = min((py_hi + h - 1) // h, <long long>out_h)
                for r in range(py_lo // h, r_end):
                    cell_lo = r * h
                    cell_hi = cell_lo + h
                    lo = py_lo if py_lo > cell_lo else cell_lo
                    hi = py_hi if py_hi < cell_hi else cell_hi
                    if hi > lo:
                        wy = hi - lo
                        out[r, c] += src[y, x] * wx * wy
    return out


def bilinear_resize(src_in, int out_h, int out_w):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] src = \
        np.ascontiguousarray(src_in, dtype=np.float64)
    cdef Py_ssize_t in_h = src.shape[0], in_w = src.shape[1]
    if out_h <= 0 or out_w <= 0:
        raise ValueError("resize dimensions must be positive")
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] out = \
        np.empty((out_h, out_w), dtype=np.float64)
    cdef double sy = in_h / <double>out_h
    cdef double sx = in_w / <double>out_w
    cdef Py_ssize_t i, j, y0, x0, y1, x1
    cdef double yc, xc, fy, fx, top, bot
    for i in range(out_h):
        yc = (i + 0.5) * sy - 0.5
        if yc < 0.0:
            yc = 0.0
        elif yc > in_h - 1.0:
            yc = in_h - 1.0
        y0 = <Py_ssize_t>yc
        fy = yc - y0
        y1 = y0 + 1
        if y1 > in_h - 1:
            y1 = in_h - 1
        for j in range(out_w):
            xc = (j + 0.5) * sx - 0.5
            if xc < 0.0:
                xc = 0.0
            elif xc > in_w - 1.0:
                xc = in_w - 1.0
            x0 = <Py_ssize_t>xc
            fx = xc - x0
            x1 = x0 + 1
            if x1 > in_w - 1:
                x1 = in_w - 1
            top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
            bot = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
            out[i, j] = top * (1.0 - fy) + bot * fy
    return out


def hamming_self_pairs(hashes, int threshold):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1, mode="c"] h = \
        np.ascontiguousarray(hashes, dtype=np.uint64)
    cdef Py_ssize_t n = h.shape[0], i, j
    cdef int d
    cdef list ri = [], rj = [], rd = []
    for i in range(n):
        for j in range(i + 1, n):
            d = __builtin_popcountll(h[i] ^ h[j])
            if d <= threshold:
                ri.append(i)
                rj.append(j)
                rd.append(d)
    return (np.asarray(ri, dtype=np.int64), np.asarray(rj, dtype=np.int64),
            np.asarray(rd, dtype=np.int64))


def hamming_cross_pairs(a_in, b_in, int threshold):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1, mode="c"] a = \
        np.ascontiguousarray(a_in, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1, mode="c"] b = \
        np.ascontiguousarray(b_in, dtype=np.uint64)
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0], i, j
    cdef int d
    cdef list ri = [], rj = [], rd = []
    for i in range(na):
        for j in range(nb):
            d = __builtin_popcountll(a[i] ^ b[j])
            if d <= threshold:
                ri.append(i)
                rj.append(j)
                rd.append(d)
    return (np.asarray(ri, dtype=np.int64), np.asarray(rj, dtype=np.int64),
            np.asarray(rd, dtype=np.int64))

"""NumPy implementations of the hot kernels.

These are the reference semantics. The compiled module in _native.pyx mirrors
every operation expression-for-expression so both backends produce
bit-identical output (integer sums are order-independent; the float kernels
share the exact IEEE evaluation order and the build avoids FMA contraction).
"""

from __future__ import annotations

import numpy as np

_HAVE_BITWISE_COUNT = hasattr(np, "bitwise_count")

# Per-byte popcount table, used only on NumPy builds without bitwise_count.
_BYTE_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)

# Block row count for the pairwise distance matrices. 1024 x 10^4 uint64
# blocks stay well under 100 MB.
_PAIR_BLOCK = 1024


def _popcount64(x: np.ndarray) -> np.ndarray:
    if _HAVE_BITWISE_COUNT:
        return np.bitwise_count(x)
    b = x.view(np.uint8) if x.flags.c_contiguous else np.ascontiguousarray(x).view(np.uint8)
    return _BYTE_POPCOUNT[b].reshape(*x.shape, 8).sum(axis=-1, dtype=np.uint8)


def box_downsample_sums(luma: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Exact integer area sums of a 2-D int64 grid over an out_h x out_w mesh.

    Coordinates are scaled so every cell boundary is an integer: pixel x spans
    [x*out_w, (x+1)*out_w) horizontally and cell c spans [c*w, (c+1)*w), so
    overlap widths are plain integer interval intersections. Each cell
    accumulates sum(luma * overlap_x * overlap_y) in int64; total weight per
    cell is w*h. Values up to 255000 per pixel are safe to around 1.9e8 pixels.
    """
    luma = np.ascontiguousarray(luma, dtype=np.int64)
    h, w = luma.shape
    if out_h <= 0 or out_w <= 0 or h <= 0 or w <= 0:
        raise ValueError("downsample dimensions must be positive")
    wx = _overlap_weights(w, out_w)  # (out_w, w)
    wy = _overlap_weights(h, out_h)  # (out_h, h)
    return wy @ luma @ wx.T


def _overlap_weights(n_in: int, n_out: int) -> np.ndarray:
    """Integer overlap of input pixel intervals with output cell intervals."""
    weights = np.zeros((n_out, n_in), dtype=np.int64)
    for c in range(n_out):
        cell_lo = c * n_in
        cell_hi = (c + 1) * n_in
        for x in range(cell_lo // n_out, min((cell_hi + n_out - 1) // n_out, n_in)):
            lo = max(x * n_out, cell_lo)
            hi = min((x + 1) * n_out, cell_hi)
            if hi > lo:
                weights[c, x] = hi - lo
    return weights


def bilinear_resize(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a 2-D float64 map with half-pixel-center bilinear sampling.

    Sample centers map as src = (i + 0.5) * (in / out) - 0.5, clamped to the
    valid range, so identity-size resizes reproduce the input exactly.
    """
    src = np.ascontiguousarray(src, dtype=np.float64)
    in_h, in_w = src.shape
    if out_h <= 0 or out_w <= 0:
        raise ValueError("resize dimensions must be positive")
    sy = in_h / out_h
    sx = in_w / out_w
    yc = np.clip((np.arange(out_h, dtype=np.float64) + 0.5) * sy - 0.5, 0.0, in_h - 1.0)
    xc = np.clip((np.arange(out_w, dtype=np.float64) + 0.5) * sx - 0.5, 0.0, in_w - 1.0)
    y0 = np.floor(yc).astype(np.int64)
    x0 = np.floor(xc).astype(np.int64)
    fy = (yc - y0)[:, None]
    fx = (xc - x0)[None, :]
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    top = src[np.ix_(y0, x0)] * (1.0 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1.0 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bot * fy


def hamming_self_pairs(hashes: np.ndarray, threshold: int):
    """All index pairs i < j with popcount(h[i] ^ h[j]) <= threshold.

    Returns (i, j, dist) int64 arrays sorted by (i, j).
    """
    h = np.ascontiguousarray(hashes, dtype=np.uint64)
    n = h.size
    out_i: list[np.ndarray] = []
    out_j: list[np.ndarray] = []
    out_d: list[np.ndarray] = []
    cols = np.arange(n, dtype=np.int64)
    for s in range(0, n, _PAIR_BLOCK):
        e = min(s + _PAIR_BLOCK, n)
        d = _popcount64(h[s:e, None] ^ h[None, :])
        mask = (d <= threshold) & (cols[None, :] > np.arange(s, e, dtype=np.int64)[:, None])
        bi, bj = np.nonzero(mask)
        out_i.append(bi.astype(np.int64) + s)
        out_j.append(bj.astype(np.int64))
        out_d.append(d[bi, bj].astype(np.int64))
    return _cat(out_i), _cat(out_j), _cat(out_d)


def hamming_cross_pairs(a: np.ndarray, b: np.ndarray, threshold: int):
    """All (i, j) with popcount(a[i] ^ b[j]) <= threshold, sorted by (i, j)."""
    a = np.ascontiguousarray(a, dtype=np.uint64)
    b = np.ascontiguousarray(b, dtype=np.uint64)
    out_i: list[np.ndarray] = []
    out_j: list[np.ndarray] = []
    out_d: list[np.ndarray] = []
    for s in range(0, a.size, _PAIR_BLOCK):
        e = min(s + _PAIR_BLOCK, a.size)
        d = _popcount64(a[s:e, None] ^ b[None, :])
        bi, bj = np.nonzero(d <= threshold)
        out_i.append(bi.astype(np.int64) + s)
        out_j.append(bj.astype(np.int64))
        out_d.append(d[bi, bj].astype(np.int64))
    return _cat(out_i), _cat(out_j), _cat(out_d)


def _cat(parts: list[np.ndarray]) -> np.ndarray:
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(parts).astype(np.int64, copy=False)

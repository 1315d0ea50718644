"""Byte hashing and gradient-based perceptual hashing.

The perceptual hash is the 64-bit difference hash: area-average the luma
down to a 9x8 grid and emit one bit per horizontally adjacent cell pair,
bit = 1 where the left cell is darker. The downsample runs in exact integer
arithmetic (luma in milli-units, integer overlap weights), so the hash is
identical across the compiled and NumPy kernel backends and across CPUs.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import kernels

PHASH_BITS = 64
_GRID_W = 9
_GRID_H = 8

# Integer milli-weights of the ITU-R 601 luma transform.
LUMA_MILLI = (299, 587, 114)


def compute_byte_hash(data: bytes) -> str:
    """SHA-256 hex digest of raw file bytes."""
    return hashlib.sha256(data).hexdigest()


def byte_hash_of_file(path) -> str:
    with open(path, "rb") as fh:
        return compute_byte_hash(fh.read())


def luma_milli(array: np.ndarray) -> np.ndarray:
    """Integer luma at 1000x scale: 299 R + 587 G + 114 B per pixel."""
    if array.ndim == 2:
        return array.astype(np.int64) * 1000
    if array.ndim == 3 and array.shape[2] >= 3:
        a = array.astype(np.int64)
        r, g, b = LUMA_MILLI
        return a[:, :, 0] * r + a[:, :, 1] * g + a[:, :, 2] * b
    raise ValueError(f"expected HxW or HxWx3 raster, got shape {array.shape}")


def compute_phash(array: np.ndarray) -> int:
    """64-bit difference hash of an image raster (uint8, gray or RGB).

    Bits are packed row-major, most significant bit first: bit for grid
    position (r, c) is 1 when cell (r, c) is darker than cell (r, c + 1).
    Cell comparison uses exact integer area sums, which all share the same
    total weight, so no division is needed and no rounding can differ.
    """
    h, w = array.shape[:2]
    if h < 2 or w < 2:
        raise ValueError(f"image too small to hash: {w}x{h}")
    sums = kernels.box_downsample_sums(luma_milli(array), _GRID_H, _GRID_W)
    value = 0
    for r in range(_GRID_H):
        for c in range(_GRID_W - 1):
            value = (value << 1) | (1 if sums[r, c] < sums[r, c + 1] else 0)
    return value


def hamming(a: int, b: int) -> int:
    """Number of differing bits between two 64-bit hashes."""
    return ((a ^ b) & ((1 << 64) - 1)).bit_count()


def phash_to_hex(value: int) -> str:
    return f"{value & ((1 << 64) - 1):016x}"


def phash_from_hex(text: str) -> int:
    if len(text) != 16:
        raise ValueError(f"perceptual hash must be 16 hex digits, got {text!r}")
    return int(text, 16)


def self_pairs_within(hashes, threshold: int, method: str = "auto"):
    """Index pairs (i, j, dist), i < j, with Hamming distance <= threshold.

    method: "brute" scans all pairs via the kernels; "blocked" uses
    multi-index pigeonhole blocking and is preferred for large corpora;
    "auto" picks blocked above 10_000 hashes. Both return identical output.
    """
    h = np.ascontiguousarray(hashes, dtype=np.uint64)
    method = _resolve_method(method, h.size, h.size, threshold)
    if method == "brute":
        i, j, d = kernels.hamming_self_pairs(h, threshold)
        return list(zip(i.tolist(), j.tolist(), d.tolist()))
    return _blocked_pairs(h, None, threshold)


def cross_pairs_within(a, b, threshold: int, method: str = "auto"):
    """Pairs (i, j, dist) with Hamming(a[i], b[j]) <= threshold, sorted."""
    a = np.ascontiguousarray(a, dtype=np.uint64)
    b = np.ascontiguousarray(b, dtype=np.uint64)
    method = _resolve_method(method, a.size, b.size, threshold)
    if method == "brute":
        i, j, d = kernels.hamming_cross_pairs(a, b, threshold)
        return list(zip(i.tolist(), j.tolist(), d.tolist()))
    return _blocked_pairs(a, b, threshold)


def _resolve_method(method: str, n_a: int, n_b: int, threshold: int) -> str:
    if method not in ("auto", "brute", "blocked"):
        raise ValueError(f"unknown scan method {method!r}")
    if method == "auto":
        # Blocking is complete only while 64 bits give threshold+1 chunks.
        if max(n_a, n_b) > 10_000 and threshold < 63:
            return "blocked"
        return "brute"
    if method == "blocked" and threshold >= 64:
        raise ValueError("blocked scan needs threshold <= 63")
    return method


def _chunk_bounds(n_chunks: int) -> list[tuple[int, int]]:
    """Split the 64-bit word into n_chunks contiguous (shift, width) fields."""
    bounds = []
    pos = 0
    for k in range(n_chunks):
        width = 64 // n_chunks + (1 if k < 64 % n_chunks else 0)
        bounds.append((pos, width))
        pos += width
    return bounds


def _blocked_pairs(a: np.ndarray, b: np.ndarray | None, threshold: int):
    """Pigeonhole blocked scan.

    Any pair within Hamming distance t agrees exactly on at least one of
    t + 1 disjoint bit chunks, so co-bucketed candidates per chunk cover all
    true pairs; candidates are then verified by popcount.
    """
    n_chunks = min(threshold + 1, 64)
    a_list = a.tolist()
    b_list = a_list if b is None else b.tolist()
    seen: set[tuple[int, int]] = set()
    for shift, width in _chunk_bounds(n_chunks):
        mask = (1 << width) - 1
        buckets: dict[int, list[int]] = {}
        for j, hv in enumerate(b_list):
            buckets.setdefault((hv >> shift) & mask, []).append(j)
        for i, hv in enumerate(a_list):
            for j in buckets.get((hv >> shift) & mask, ()):
                if b is None:
                    if j <= i:
                        continue
                    seen.add((i, j))
                else:
                    seen.add((i, j))
    out = []
    for i, j in sorted(seen):
        d = (a_list[i] ^ b_list[j]).bit_count()
        if d <= threshold:
            out.append((i, j, d))
    return out

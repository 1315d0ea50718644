"""Kernel tests: NumPy reference vs compiled backend, plus slow oracles."""

import math

import numpy as np
import pytest

from rigorbench.kernels import pyops

try:
    from rigorbench.kernels import _native
except ImportError:
    _native = None

BACKENDS = [pyops] if _native is None else [pyops, _native]

needs_native = pytest.mark.skipif(_native is None, reason="compiled kernels unavailable")


def oracle_box_sums(luma, out_h, out_w):
    """Independent triple-loop area-sum computation in scaled integers."""
    h, w = luma.shape
    out = [[0] * out_w for _ in range(out_h)]
    for r in range(out_h):
        for c in range(out_w):
            for y in range(h):
                wy = max(0, min((y + 1) * out_h, (r + 1) * h) - max(y * out_h, r * h))
                if wy == 0:
                    continue
                for x in range(w):
                    wx = max(0, min((x + 1) * out_w, (c + 1) * w) - max(x * out_w, c * w))
                    if wx:
                        out[r][c] += int(luma[y, x]) * wx * wy
    return np.array(out, dtype=np.int64)


def oracle_bilinear(src, out_h, out_w):
    """Direct per-pixel bilinear evaluation with half-pixel centers."""
    in_h, in_w = src.shape
    out = np.empty((out_h, out_w))
    for i in range(out_h):
        yc = min(max((i + 0.5) * in_h / out_h - 0.5, 0.0), in_h - 1.0)
        y0 = math.floor(yc)
        y1 = min(y0 + 1, in_h - 1)
        fy = yc - y0
        for j in range(out_w):
            xc = min(max((j + 0.5) * in_w / out_w - 0.5, 0.0), in_w - 1.0)
            x0 = math.floor(xc)
            x1 = min(x0 + 1, in_w - 1)
            fx = xc - x0
            out[i, j] = (
                src[y0, x0] * (1 - fx) * (1 - fy)
                + src[y0, x1] * fx * (1 - fy)
                + src[y1, x0] * (1 - fx) * fy
                + src[y1, x1] * fx * fy
            )
    return out


def oracle_pairs(hashes, threshold):
    vals = [int(v) for v in hashes]
    return [
        (i, j, (vals[i] ^ vals[j]).bit_count())
        for i in range(len(vals))
        for j in range(i + 1, len(vals))
        if (vals[i] ^ vals[j]).bit_count() <= threshold
    ]


@pytest.mark.parametrize("impl", BACKENDS)
@pytest.mark.parametrize("shape,grid", [((8, 9), (8, 9)), ((17, 23), (8, 9)), ((5, 4), (3, 3))])
def test_box_sums_match_oracle(impl, shape, grid):
    rng = np.random.default_rng(7)
    luma = rng.integers(0, 255001, size=shape).astype(np.int64)
    got = impl.box_downsample_sums(luma, *grid)
    assert np.array_equal(got, oracle_box_sums(luma, *grid))


@pytest.mark.parametrize("impl", BACKENDS)
def test_box_sums_total_mass(impl):
    # every cell weights w*h of scaled area, so the grand total is
    # sum(luma) * out_h * out_w
    rng = np.random.default_rng(3)
    luma = rng.integers(0, 255001, size=(31, 47)).astype(np.int64)
    got = impl.box_downsample_sums(luma, 8, 9)
    assert got.sum() == luma.sum() * 8 * 9


@needs_native
def test_box_sums_backends_identical():
    rng = np.random.default_rng(11)
    for shape in [(8, 9), (64, 64), (37, 101), (2, 2)]:
        luma = rng.integers(0, 255001, size=shape).astype(np.int64)
        assert np.array_equal(
            pyops.box_downsample_sums(luma, 8, 9),
            _native.box_downsample_sums(luma, 8, 9),
        )


@pytest.mark.parametrize("impl", BACKENDS)
def test_bilinear_identity_is_exact(impl):
    rng = np.random.default_rng(5)
    src = rng.random((23, 31))
    out = impl.bilinear_resize(src, 23, 31)
    assert np.array_equal(out, src)


@pytest.mark.parametrize("impl", BACKENDS)
@pytest.mark.parametrize("out_shape", [(257, 193), (7, 7), (64, 64), (1, 1)])
def test_bilinear_matches_oracle(impl, out_shape):
    rng = np.random.default_rng(9)
    for in_shape in [(64, 64), (13, 29), (2, 2)]:
        src = rng.random(in_shape)
        got = impl.bilinear_resize(src, *out_shape)
        assert got.shape == out_shape
        assert np.max(np.abs(got - oracle_bilinear(src, *out_shape))) < 1e-6


@pytest.mark.parametrize("impl", BACKENDS)
def test_bilinear_preserves_range(impl):
    rng = np.random.default_rng(13)
    src = rng.random((16, 16))
    out = impl.bilinear_resize(src, 100, 3)
    assert out.min() >= src.min() - 1e-12
    assert out.max() <= src.max() + 1e-12


@needs_native
def test_bilinear_backends_bit_identical():
    rng = np.random.default_rng(17)
    for in_shape, out_shape in [((64, 64), (257, 193)), ((9, 4), (31, 57)), ((3, 3), (3, 3))]:
        src = rng.random(in_shape)
        a = pyops.bilinear_resize(src, *out_shape)
        b = _native.bilinear_resize(src, *out_shape)
        assert a.dtype == b.dtype == np.float64
        assert np.array_equal(a, b), "float kernels diverged between backends"


@pytest.mark.parametrize("impl", BACKENDS)
@pytest.mark.parametrize("threshold", [0, 4, 8, 64])
def test_self_pairs_match_oracle(impl, threshold):
    rng = np.random.default_rng(21)
    hashes = rng.integers(0, 2**64, size=120, dtype=np.uint64)
    # plant near pairs so low thresholds are exercised
    hashes[10] = hashes[50]
    hashes[11] = hashes[60] ^ np.uint64(0b111)
    i, j, d = impl.hamming_self_pairs(hashes, threshold)
    got = list(zip(i.tolist(), j.tolist(), d.tolist()))
    assert got == oracle_pairs(hashes, threshold)


@pytest.mark.parametrize("impl", BACKENDS)
def test_cross_pairs_match_oracle(impl):
    rng = np.random.default_rng(23)
    a = rng.integers(0, 2**64, size=70, dtype=np.uint64)
    b = rng.integers(0, 2**64, size=90, dtype=np.uint64)
    b[5] = a[3]
    b[7] = a[3] ^ np.uint64(1 << 20)
    i, j, d = impl.hamming_cross_pairs(a, b, 8)
    got = list(zip(i.tolist(), j.tolist(), d.tolist()))
    expected = [
        (ii, jj, (int(a[ii]) ^ int(b[jj])).bit_count())
        for ii in range(a.size)
        for jj in range(b.size)
        if (int(a[ii]) ^ int(b[jj])).bit_count() <= 8
    ]
    assert got == expected


@pytest.mark.parametrize("impl", BACKENDS)
def test_pair_scans_empty_input(impl):
    empty = np.empty(0, dtype=np.uint64)
    i, j, d = impl.hamming_self_pairs(empty, 8)
    assert i.size == j.size == d.size == 0
    i, j, d = impl.hamming_cross_pairs(empty, empty, 8)
    assert i.size == 0


@needs_native
def test_pair_scans_backends_identical():
    rng = np.random.default_rng(29)
    hashes = rng.integers(0, 2**64, size=400, dtype=np.uint64)
    for threshold in (0, 8, 31):
        pa = pyops.hamming_self_pairs(hashes, threshold)
        na = _native.hamming_self_pairs(hashes, threshold)
        assert all(np.array_equal(x, y) for x, y in zip(pa, na))
        pc = pyops.hamming_cross_pairs(hashes[:150], hashes[150:], threshold)
        nc = _native.hamming_cross_pairs(hashes[:150], hashes[150:], threshold)
        assert all(np.array_equal(x, y) for x, y in zip(pc, nc))

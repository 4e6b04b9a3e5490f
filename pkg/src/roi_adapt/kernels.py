"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Three kernel families dominate encode/score runtime: the 8x8 block DCT, the
zero-run/varint entropy coder, and the separable Gaussian filtering behind
SSIM. Each has two implementations selected once at import time by the
ROI_ADAPT_BACKEND environment variable:

    ROI_ADAPT_BACKEND=numba   require numba (raise if unavailable)
    ROI_ADAPT_BACKEND=numpy   force the pure-numpy path
    unset / auto              numba when importable, else numpy

``benchmarks/bench_backends.py`` times the two paths side by side.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "HAVE_NUMBA",
    "dct2_blocks",
    "idct2_blocks",
    "rle_encode",
    "rle_decode",
    "filter2_valid",
    "implementations",
]


def _dct_matrix() -> np.ndarray:
    k = np.arange(8, dtype=np.float64)[:, None]
    n = np.arange(8, dtype=np.float64)[None, :]
    m = np.cos((2.0 * n + 1.0) * k * np.pi / 16.0)
    m[0, :] *= np.sqrt(1.0 / 8.0)
    m[1:, :] *= np.sqrt(2.0 / 8.0)
    return m


_DCT_M = _dct_matrix()
_DCT_MT = np.ascontiguousarray(_DCT_M.T)

# Worst-case bytes per coded block: 64 (run, level) varint pairs plus the
# (0, 0) end-of-block pair; int64 varints never exceed 10 bytes.
_MAX_BLOCK_BYTES = 64 * 11 + 2


# ---------------------------------------------------------------------------
# pure-numpy implementations


def _dct2_blocks_numpy(blocks: np.ndarray) -> np.ndarray:
    return _DCT_M @ blocks @ _DCT_MT


def _idct2_blocks_numpy(blocks: np.ndarray) -> np.ndarray:
    return _DCT_MT @ blocks @ _DCT_M


def _filter2_valid_numpy(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    from numpy.lib.stride_tricks import sliding_window_view

    rows = sliding_window_view(img, taps.size, axis=1) @ taps
    return sliding_window_view(rows, taps.size, axis=0) @ taps


# ---------------------------------------------------------------------------
# loop implementations; compiled under numba, runnable as plain python


def _dct2_blocks_loop(blocks, m, mt):
    out = np.empty_like(blocks)
    for i in range(blocks.shape[0]):
        out[i] = np.dot(np.dot(m, blocks[i]), mt)
    return out


def _filter2_valid_loop(img, taps):
    h, w = img.shape
    t = taps.shape[0]
    tmp = np.empty((h, w - t + 1), dtype=np.float64)
    out = np.empty((h - t + 1, w - t + 1), dtype=np.float64)
    for y in range(h):
        for x in range(w - t + 1):
            acc = 0.0
            for k in range(t):
                acc += img[y, x + k] * taps[k]
            tmp[y, x] = acc
    for y in range(h - t + 1):
        for x in range(w - t + 1):
            acc = 0.0
            for k in range(t):
                acc += tmp[y + k, x] * taps[k]
            out[y, x] = acc
    return out


def _rle_encode_impl(levels, out):
    """Pack zigzag-ordered quantized levels into the byte stream.

    Per block: (zero-run, zigzag-mapped level) varint pairs for each nonzero
    level, then a (0, 0) pair as end-of-block. Returns bytes written.
    """
    pos = 0
    nblocks = levels.shape[0]
    width = levels.shape[1]
    for b in range(nblocks):
        run = np.int64(0)
        for i in range(width):
            v = np.int64(levels[b, i])
            if v == 0:
                run += 1
                continue
            u = run
            while u >= 128:
                out[pos] = (u & 127) | 128
                pos += 1
                u >>= 7
            out[pos] = u
            pos += 1
            if v >= 0:
                z = 2 * v
            else:
                z = -2 * v - 1
            while z >= 128:
                out[pos] = (z & 127) | 128
                pos += 1
                z >>= 7
            out[pos] = z
            pos += 1
            run = np.int64(0)
        out[pos] = 0
        pos += 1
        out[pos] = 0
        pos += 1
    return pos


def _rle_decode_impl(data, out):
    """Inverse of ``_rle_encode_impl``; fills ``out`` (zero-initialized).

    Returns bytes consumed, or a negative status: -1 truncated stream,
    -2 run overflows the block, -3 oversized varint.
    """
    pos = 0
    n = data.shape[0]
    nblocks = out.shape[0]
    width = out.shape[1]
    for b in range(nblocks):
        i = 0
        while True:
            run = np.int64(0)
            shift = 0
            while True:
                if pos >= n:
                    return -1
                byte = data[pos]
                pos += 1
                if shift > 63:
                    return -3
                run |= np.int64(byte & 127) << shift
                shift += 7
                if byte < 128:
                    break
            z = np.int64(0)
            shift = 0
            while True:
                if pos >= n:
                    return -1
                byte = data[pos]
                pos += 1
                if shift > 63:
                    return -3
                z |= np.int64(byte & 127) << shift
                shift += 7
                if byte < 128:
                    break
            if run == 0 and z == 0:
                break
            i += run
            if i >= width:
                return -2
            if z & 1 == 0:
                out[b, i] = z >> 1
            else:
                out[b, i] = -((z + 1) >> 1)
            i += 1
    return pos


# ---------------------------------------------------------------------------
# backend selection

_requested = os.environ.get("ROI_ADAPT_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"ROI_ADAPT_BACKEND must be auto, numba or numpy, got {_requested!r}"
    )

HAVE_NUMBA = False
if _requested in ("auto", "numba"):
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise

if HAVE_NUMBA:
    BACKEND = "numba"
    _dct2_blocks_nb = njit(cache=True)(_dct2_blocks_loop)
    _filter2_valid_nb = njit(cache=True)(_filter2_valid_loop)
    _rle_encode_nb = njit(cache=True)(_rle_encode_impl)
    _rle_decode_nb = njit(cache=True)(_rle_decode_impl)
else:
    BACKEND = "numpy"


# ---------------------------------------------------------------------------
# public API


def dct2_blocks(blocks: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D type-II DCT of a stack of 8x8 float64 blocks."""
    blocks = np.ascontiguousarray(blocks, dtype=np.float64)
    if BACKEND == "numba":
        return _dct2_blocks_nb(blocks, _DCT_M, _DCT_MT)
    return _dct2_blocks_numpy(blocks)


def idct2_blocks(blocks: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dct2_blocks`."""
    blocks = np.ascontiguousarray(blocks, dtype=np.float64)
    if BACKEND == "numba":
        return _dct2_blocks_nb(blocks, _DCT_MT, _DCT_M)
    return _idct2_blocks_numpy(blocks)


def rle_encode(levels: np.ndarray) -> bytes:
    """Entropy-code quantized levels (n_blocks, 64) in zigzag order."""
    levels = np.ascontiguousarray(levels, dtype=np.int32)
    buf = np.empty(levels.shape[0] * _MAX_BLOCK_BYTES, dtype=np.uint8)
    if BACKEND == "numba":
        used = _rle_encode_nb(levels, buf)
    else:
        used = _rle_encode_impl(levels, buf)
    return buf[:used].tobytes()


def rle_decode(data: bytes, n_blocks: int, width: int = 64) -> np.ndarray:
    """Decode an entropy-coded stream back to (n_blocks, width) levels.

    Raises ValueError on truncated or corrupt streams and on trailing bytes.
    """
    arr = np.frombuffer(data, dtype=np.uint8)
    out = np.zeros((n_blocks, width), dtype=np.int32)
    if BACKEND == "numba":
        status = _rle_decode_nb(arr, out)
    else:
        status = _rle_decode_impl(arr, out)
    if status == -1:
        raise ValueError("entropy stream truncated")
    if status == -2:
        raise ValueError("entropy stream corrupt: zero run exceeds block")
    if status == -3:
        raise ValueError("entropy stream corrupt: oversized varint")
    if status != arr.size:
        raise ValueError(
            f"entropy stream has {arr.size - status} trailing bytes"
        )
    return out


def filter2_valid(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with a symmetric 1-D tap vector."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    taps = np.ascontiguousarray(taps, dtype=np.float64)
    if BACKEND == "numba":
        return _filter2_valid_nb(img, taps)
    return _filter2_valid_numpy(img, taps)


def implementations() -> dict:
    """Both backends' kernels, for equivalence tests and the benchmark."""
    impls = {
        "numpy": {
            "dct2_blocks": _dct2_blocks_numpy,
            "idct2_blocks": _idct2_blocks_numpy,
            "filter2_valid": _filter2_valid_numpy,
            "rle_encode": _rle_encode_impl,
            "rle_decode": _rle_decode_impl,
        }
    }
    if HAVE_NUMBA:
        impls["numba"] = {
            "dct2_blocks": lambda b: _dct2_blocks_nb(b, _DCT_M, _DCT_MT),
            "idct2_blocks": lambda b: _dct2_blocks_nb(b, _DCT_MT, _DCT_M),
            "filter2_valid": _filter2_valid_nb,
            "rle_encode": _rle_encode_nb,
            "rle_decode": _rle_decode_nb,
        }
    return impls

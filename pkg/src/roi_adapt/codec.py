"""ROI-preserving 8x8 block-DCT codec.

The region of interest is stored raw (lossless); everything else is
DCT-quantized with a quality-factor-scaled table and entropy-coded as
zigzag (zero-run, level) varint pairs. The serialized container's byte
length is the frame size used by the regression, the environment and the
streaming harness.

Container layout (all integers big-endian):

    magic "ROI1" | version u8 | width u16 | height u16 |
    roi x0, y0, w, h each u16 | qf u8 | roi_payload_len u32 |
    bg_payload_len u32 | roi_payload | bg_payload

Version 1 is the luma-only default. Version 2 appends two u32 lengths for
optional 4:2:0 chroma payloads (coded lossy over the whole subsampled
plane with the same table), followed by those payloads.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels

MAGIC = b"ROI1"
BLOCK = 8

_HEADER = struct.Struct(">4sBHHHHHHBII")
_CHROMA_LENS = struct.Struct(">II")

# Zigzag scan position -> natural (row-major) coefficient index.
ZIGZAG_TO_NATURAL = np.array([
    0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
], dtype=np.int64)

# Standard JPEG luminance quantization table, natural order.
_BASE_LUMA_NATURAL = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
], dtype=np.int64)

BASE_LUMA_QUANT = _BASE_LUMA_NATURAL[ZIGZAG_TO_NATURAL]


class DecodeError(Exception):
    """Raised when a serialized container is malformed or corrupt."""


@dataclass(frozen=True)
class RoiBox:
    """Axis-aligned pixel box: offsets (x0, y0) and extents (w, h)."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0 or self.w < 0 or self.h < 0:
            raise ValueError(f"negative ROI geometry: {self}")

    @property
    def x1(self) -> int:
        return self.x0 + self.w

    @property
    def y1(self) -> int:
        return self.y0 + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def validate_within(self, width: int, height: int) -> None:
        if self.x1 > width or self.y1 > height:
            raise ValueError(
                f"ROI {self} exceeds frame bounds {width}x{height}"
            )

    def snap_outward(self, width: int, height: int) -> "RoiBox":
        """Grow to 8-pixel block alignment, clipped to the frame."""
        self.validate_within(width, height)
        x0 = (self.x0 // BLOCK) * BLOCK
        y0 = (self.y0 // BLOCK) * BLOCK
        x1 = min(width, math.ceil(self.x1 / BLOCK) * BLOCK)
        y1 = min(height, math.ceil(self.y1 / BLOCK) * BLOCK)
        return RoiBox(x0, y0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class Frame:
    """One video frame: a mandatory luma plane, optional 4:2:0 chroma,
    and the annotated original ROI box."""

    planes: tuple
    roi: RoiBox
    orig_size: tuple | None = None

    def __post_init__(self):
        if len(self.planes) not in (1, 3):
            raise ValueError("frame needs 1 (luma) or 3 (luma+chroma) planes")
        luma = self.planes[0]
        h, w = luma.shape
        if w <= 0 or h <= 0 or w % BLOCK or h % BLOCK:
            raise ValueError(
                f"frame dims {w}x{h} must be positive multiples of {BLOCK}"
            )
        for p in self.planes:
            if p.dtype != np.uint8:
                raise ValueError("plane samples must be uint8")
        if len(self.planes) == 3:
            for p in self.planes[1:]:
                if p.shape != (h // 2, w // 2):
                    raise ValueError("chroma planes must be 4:2:0 subsampled")
        self.roi.validate_within(w, h)

    @property
    def luma(self) -> np.ndarray:
        return self.planes[0]

    @property
    def width(self) -> int:
        return self.planes[0].shape[1]

    @property
    def height(self) -> int:
        return self.planes[0].shape[0]

    @property
    def raw_bytes(self) -> int:
        return sum(p.nbytes for p in self.planes)


@dataclass(frozen=True)
class QuantTable:
    """64 quantizer steps in zigzag order, derived from a quality factor."""

    entries: np.ndarray
    qf: int

    def __post_init__(self):
        if self.entries.shape != (64,):
            raise ValueError("quantization table needs exactly 64 entries")
        if self.entries.min() < 1 or self.entries.max() > 255:
            raise ValueError("quantization entries must lie in [1, 255]")


@dataclass(frozen=True)
class EncodedFrame:
    """Parsed container; ``to_bytes`` serializes it bit-exactly."""

    width: int
    height: int
    roi: RoiBox
    qf: int
    roi_payload: bytes
    bg_payload: bytes
    chroma_payloads: tuple = field(default=())

    @property
    def version(self) -> int:
        return 2 if self.chroma_payloads else 1

    @property
    def n_planes(self) -> int:
        return 3 if self.chroma_payloads else 1

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(
            MAGIC, self.version, self.width, self.height,
            self.roi.x0, self.roi.y0, self.roi.w, self.roi.h,
            self.qf, len(self.roi_payload), len(self.bg_payload),
        )
        if not self.chroma_payloads:
            return head + self.roi_payload + self.bg_payload
        cb, cr = self.chroma_payloads
        return (
            head + _CHROMA_LENS.pack(len(cb), len(cr))
            + self.roi_payload + self.bg_payload + cb + cr
        )

    @property
    def total_bytes(self) -> int:
        extra = _CHROMA_LENS.size if self.chroma_payloads else 0
        return (
            _HEADER.size + extra + len(self.roi_payload)
            + len(self.bg_payload) + sum(len(c) for c in self.chroma_payloads)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncodedFrame":
        if len(data) < _HEADER.size:
            raise DecodeError("container shorter than header")
        (magic, version, width, height, rx, ry, rw, rh, qf,
         roi_len, bg_len) = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise DecodeError(f"bad magic {magic!r}")
        if version not in (1, 2):
            raise DecodeError(f"unsupported container version {version}")
        if width <= 0 or height <= 0 or width % BLOCK or height % BLOCK:
            raise DecodeError(f"invalid frame dims {width}x{height}")
        if not 1 <= qf <= 100:
            raise DecodeError(f"quality factor {qf} out of range")
        try:
            roi = RoiBox(rx, ry, rw, rh)
            roi.validate_within(width, height)
        except ValueError as exc:
            raise DecodeError(str(exc)) from exc
        pos = _HEADER.size
        chroma_lens = ()
        if version == 2:
            if len(data) < pos + _CHROMA_LENS.size:
                raise DecodeError("container truncated in chroma lengths")
            chroma_lens = _CHROMA_LENS.unpack_from(data, pos)
            pos += _CHROMA_LENS.size
        expected = pos + roi_len + bg_len + sum(chroma_lens)
        if len(data) != expected:
            raise DecodeError(
                f"container length {len(data)} != declared {expected}"
            )
        roi_payload = data[pos:pos + roi_len]
        pos += roi_len
        bg_payload = data[pos:pos + bg_len]
        pos += bg_len
        chroma_payloads = []
        for n in chroma_lens:
            chroma_payloads.append(data[pos:pos + n])
            pos += n
        return cls(width, height, roi, qf, roi_payload, bg_payload,
                   tuple(chroma_payloads))


def make_quant_table(qf: int, base: np.ndarray | None = None) -> QuantTable:
    """Scale the base table by quality factor (libjpeg convention).

    scale = 5000/qf below 50 else 200 - 2*qf; entries floor-scaled and
    clamped to [1, 255]. qf=50 reproduces the base table exactly.
    """
    if not isinstance(qf, (int, np.integer)) or not 1 <= qf <= 100:
        raise ValueError(f"quality factor must be an integer in [1, 100], got {qf!r}")
    if base is None:
        base = BASE_LUMA_QUANT
    base = np.asarray(base, dtype=np.int64)
    if base.shape != (64,):
        raise ValueError("base table needs exactly 64 entries")
    if qf < 50:
        # exact rational 5000/qf: entry = floor((b*5000/qf + 50) / 100)
        entries = (base * 5000 + 50 * qf) // (100 * qf)
    else:
        scale = 200 - 2 * qf
        entries = (base * scale + 50) // 100
    entries = np.clip(entries, 1, 255)
    return QuantTable(entries=entries, qf=int(qf))


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def forward_dct_block(block: np.ndarray) -> np.ndarray:
    """Level-shift by -128 and apply the orthonormal 2-D DCT."""
    block = np.asarray(block, dtype=np.float64)
    if block.shape != (BLOCK, BLOCK):
        raise ValueError("expected an 8x8 block")
    return kernels.dct2_blocks((block - 128.0)[None])[0]


def inverse_dct_block(coeffs: np.ndarray) -> np.ndarray:
    """Inverse DCT plus level unshift; returns float64 samples."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (BLOCK, BLOCK):
        raise ValueError("expected an 8x8 coefficient block")
    return kernels.idct2_blocks(coeffs[None])[0] + 128.0


def quantize_block(coeffs: np.ndarray, qt: QuantTable) -> np.ndarray:
    """Quantize an 8x8 coefficient block to 64 zigzag-ordered levels."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (BLOCK, BLOCK):
        raise ValueError("expected an 8x8 coefficient block")
    zz = coeffs.ravel()[ZIGZAG_TO_NATURAL]
    return _round_half_away(zz / qt.entries).astype(np.int32)


def dequantize_block(levels: np.ndarray, qt: QuantTable) -> np.ndarray:
    """Expand 64 zigzag-ordered levels back to an 8x8 coefficient block."""
    levels = np.asarray(levels)
    if levels.shape != (64,):
        raise ValueError("expected 64 zigzag-ordered levels")
    coeffs = np.empty(64, dtype=np.float64)
    coeffs[ZIGZAG_TO_NATURAL] = levels * qt.entries.astype(np.float64)
    return coeffs.reshape(BLOCK, BLOCK)


def pad_to_block_multiple(plane: np.ndarray, m: int = BLOCK) -> np.ndarray:
    """Edge-replicate so both dims are positive multiples of ``m``."""
    h, w = plane.shape
    ph = (-h) % m
    pw = (-w) % m
    if ph == 0 and pw == 0:
        return plane
    return np.pad(plane, ((0, ph), (0, pw)), mode="edge")


def _block_stack(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return plane.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2)


def _bg_mask(width: int, height: int, roi: RoiBox) -> np.ndarray:
    bh, bw = height // BLOCK, width // BLOCK
    mask = np.ones((bh, bw), dtype=bool)
    mask[roi.y0 // BLOCK:roi.y1 // BLOCK, roi.x0 // BLOCK:roi.x1 // BLOCK] = False
    return mask


def _encode_blocks(blocks: np.ndarray, qt: QuantTable) -> bytes:
    if blocks.shape[0] == 0:
        return b""
    coeffs = kernels.dct2_blocks(blocks.astype(np.float64) - 128.0)
    zz = coeffs.reshape(-1, 64)[:, ZIGZAG_TO_NATURAL]
    levels = _round_half_away(zz / qt.entries).astype(np.int32)
    return kernels.rle_encode(levels)


def _decode_blocks(payload: bytes, n_blocks: int, qt: QuantTable) -> np.ndarray:
    try:
        levels = kernels.rle_decode(payload, n_blocks)
    except ValueError as exc:
        raise DecodeError(str(exc)) from exc
    coeffs = np.zeros((n_blocks, 64), dtype=np.float64)
    coeffs[:, ZIGZAG_TO_NATURAL] = levels * qt.entries.astype(np.float64)
    samples = kernels.idct2_blocks(coeffs.reshape(-1, BLOCK, BLOCK)) + 128.0
    return np.clip(np.rint(samples), 0, 255).astype(np.uint8)


def encode_frame(frame: Frame, roi: RoiBox | None = None, qf: int = 50) -> EncodedFrame:
    """Encode with a lossless ROI and DCT-compressed background.

    The ROI is snapped outward to block alignment before the split, so the
    supplied box always survives decode bit-exactly. A full-frame ROI
    yields an empty background payload.
    """
    if roi is None:
        roi = frame.roi
    if not isinstance(qf, (int, np.integer)) or not 1 <= qf <= 100:
        raise ValueError(f"quality factor must be an integer in [1, 100], got {qf!r}")
    roi.validate_within(frame.width, frame.height)
    aligned = roi.snap_outward(frame.width, frame.height)
    qt = make_quant_table(int(qf))

    luma = frame.luma
    roi_payload = luma[aligned.y0:aligned.y1, aligned.x0:aligned.x1].tobytes()
    mask = _bg_mask(frame.width, frame.height, aligned)
    bg_blocks = _block_stack(luma)[mask]
    bg_payload = _encode_blocks(bg_blocks, qt)

    chroma_payloads = []
    if len(frame.planes) == 3:
        for plane in frame.planes[1:]:
            padded = pad_to_block_multiple(plane)
            chroma_payloads.append(
                _encode_blocks(_block_stack(padded).reshape(-1, BLOCK, BLOCK), qt)
            )
    return EncodedFrame(frame.width, frame.height, aligned, int(qf),
                        roi_payload, bg_payload, tuple(chroma_payloads))


def decode_frame(ef: EncodedFrame) -> Frame:
    """Reconstruct a frame: ROI bit-exact, background dequantized IDCT."""
    w, h = ef.width, ef.height
    roi = ef.roi
    if roi.x0 % BLOCK or roi.y0 % BLOCK or roi.w % BLOCK or roi.h % BLOCK:
        raise DecodeError(f"container ROI {roi} is not block-aligned")
    if len(ef.roi_payload) != roi.area:
        raise DecodeError(
            f"ROI payload is {len(ef.roi_payload)} bytes, expected {roi.area}"
        )
    qt = make_quant_table(ef.qf)
    mask = _bg_mask(w, h, roi)
    n_bg = int(mask.sum())
    plane = np.zeros((h, w), dtype=np.uint8)
    if n_bg:
        blocks = _decode_blocks(ef.bg_payload, n_bg, qt)
        stacked = _block_stack(plane)
        stacked[mask] = blocks
    elif ef.bg_payload:
        raise DecodeError("background payload present but no background blocks")
    if roi.area:
        plane[roi.y0:roi.y1, roi.x0:roi.x1] = np.frombuffer(
            ef.roi_payload, dtype=np.uint8
        ).reshape(roi.h, roi.w)

    planes = [plane]
    if ef.chroma_payloads:
        ch, cw = h // 2, w // 2
        ph, pw = math.ceil(ch / BLOCK) * BLOCK, math.ceil(cw / BLOCK) * BLOCK
        n_blocks = (ph // BLOCK) * (pw // BLOCK)
        for payload in ef.chroma_payloads:
            blocks = _decode_blocks(payload, n_blocks, qt)
            padded = np.zeros((ph, pw), dtype=np.uint8)
            view = _block_stack(padded)
            view[:] = blocks.reshape(ph // BLOCK, pw // BLOCK, BLOCK, BLOCK)
            planes.append(padded[:ch, :cw])
    return Frame(planes=tuple(planes), roi=roi)


def compression_ratio(frame: Frame, encoded: EncodedFrame) -> float:
    """Raw plane bytes divided by serialized container bytes."""
    return frame.raw_bytes / encoded.total_bytes

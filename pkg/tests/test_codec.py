import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roi_adapt import codec
from roi_adapt.codec import (BASE_LUMA_QUANT, DecodeError, EncodedFrame, Frame,
                             RoiBox, compression_ratio, decode_frame,
                             dequantize_block, encode_frame, forward_dct_block,
                             inverse_dct_block, make_quant_table, quantize_block)


def _frame(seed=0, w=64, h=48, roi=RoiBox(16, 8, 24, 16)):
    rng = np.random.default_rng(seed)
    luma = rng.integers(0, 256, size=(h, w), dtype=np.int64).astype(np.uint8)
    return Frame(planes=(luma,), roi=roi)


# ---------------------------------------------------------------- quant table

def test_quant_table_qf50_is_base():
    assert np.array_equal(make_quant_table(50).entries, BASE_LUMA_QUANT)


def test_quant_table_qf100_all_ones():
    qt = make_quant_table(100)
    assert qt.entries.min() == qt.entries.max() == 1


def test_quant_table_qf10_hand_value():
    # base[0]=16, scale=500: floor((16*500 + 50)/100) = 80
    assert BASE_LUMA_QUANT[0] == 16
    assert make_quant_table(10).entries[0] == 80


@pytest.mark.parametrize("qf", [0, 101, -3, 1.5, "50"])
def test_quant_table_rejects_bad_qf(qf):
    with pytest.raises(ValueError):
        make_quant_table(qf)


def test_quant_table_monotone_in_qf():
    prev = make_quant_table(1).entries
    for qf in range(2, 101):
        cur = make_quant_table(qf).entries
        assert np.all(cur <= prev), f"entries grew from qf={qf - 1} to {qf}"
        prev = cur


# ------------------------------------------------------------------------ dct

def test_dct_constant_128_is_zero():
    coeffs = forward_dct_block(np.full((8, 8), 128.0))
    assert np.abs(coeffs).max() < 1e-12


def test_dct_constant_255_dc_only():
    coeffs = forward_dct_block(np.full((8, 8), 255.0))
    assert abs(coeffs[0, 0] - 8.0 * (255 - 128)) < 1e-9
    rest = coeffs.copy()
    rest[0, 0] = 0.0
    assert np.abs(rest).max() < 1e-9


def test_dct_roundtrip_under_half_sample():
    rng = np.random.default_rng(4)
    for _ in range(20):
        block = rng.integers(0, 256, size=(8, 8)).astype(np.float64)
        back = inverse_dct_block(forward_dct_block(block))
        assert np.abs(back - block).max() < 0.5


# ------------------------------------------------------------------- quantize

def test_quantize_zero_coeffs():
    qt = make_quant_table(50)
    assert np.all(quantize_block(np.zeros((8, 8)), qt) == 0)


def test_quantize_exact_multiple():
    qt = codec.QuantTable(entries=np.full(64, 16, dtype=np.int64), qf=50)
    coeffs = np.zeros((8, 8))
    coeffs[0, 0] = 160.0
    levels = quantize_block(coeffs, qt)
    assert levels[0] == 10
    assert dequantize_block(levels, qt)[0, 0] == 160.0


def test_quantize_rounding_bound():
    qt = codec.QuantTable(entries=np.full(64, 16, dtype=np.int64), qf=50)
    coeffs = np.zeros((8, 8))
    coeffs[0, 0] = 167.0
    levels = quantize_block(coeffs, qt)
    assert levels[0] == 10
    recon = dequantize_block(levels, qt)[0, 0]
    assert recon == 160.0
    assert abs(167.0 - recon) <= 16 / 2


# ------------------------------------------------------------- encode/decode

def test_roi_survives_bit_exact():
    frame = _frame()
    for qf in (1, 25, 50, 100):
        dec = decode_frame(encode_frame(frame, qf=qf))
        r = frame.roi.snap_outward(frame.width, frame.height)
        assert np.array_equal(dec.luma[r.y0:r.y1, r.x0:r.x1],
                              frame.luma[r.y0:r.y1, r.x0:r.x1])


def test_full_frame_roi_is_lossless_and_bg_empty():
    frame = _frame(roi=RoiBox(0, 0, 64, 48))
    ef = encode_frame(frame, qf=30)
    assert ef.bg_payload == b""
    assert np.array_equal(decode_frame(ef).luma, frame.luma)
    # encoded is raw plus a small header: ratio just under 1
    ratio = compression_ratio(frame, ef)
    assert ratio < 1.0
    assert 1.0 / ratio < 1.02


def test_background_error_bounded_at_qf100(corpus_frames):
    frame = corpus_frames[0]
    dec = decode_frame(encode_frame(frame, qf=100))
    err = np.abs(dec.luma.astype(int) - frame.luma.astype(int)).max()
    assert err <= make_quant_table(100).entries.max()


def test_zero_area_roi_is_legal():
    frame = _frame(roi=RoiBox(0, 0, 0, 0))
    ef = encode_frame(frame, qf=40)
    assert ef.roi_payload == b""
    assert decode_frame(ef).luma.shape == frame.luma.shape


def test_encode_rejects_bad_inputs():
    frame = _frame()
    with pytest.raises(ValueError):
        encode_frame(frame, roi=RoiBox(60, 0, 16, 8), qf=50)  # exceeds width
    with pytest.raises(ValueError):
        encode_frame(frame, qf=0)
    with pytest.raises(ValueError):
        RoiBox(-1, 0, 8, 8)


def test_decode_rejects_bad_magic():
    data = bytearray(encode_frame(_frame(), qf=50).to_bytes())
    data[:4] = b"JUNK"
    with pytest.raises(DecodeError, match="magic"):
        EncodedFrame.from_bytes(bytes(data))


def test_decode_rejects_truncation_and_length_lies():
    data = encode_frame(_frame(), qf=50).to_bytes()
    with pytest.raises(DecodeError):
        EncodedFrame.from_bytes(data[:20])
    with pytest.raises(DecodeError, match="length"):
        EncodedFrame.from_bytes(data + b"x")


def test_decode_rejects_corrupt_bg_payload():
    ef = encode_frame(_frame(), qf=50)
    bad = EncodedFrame(ef.width, ef.height, ef.roi, ef.qf, ef.roi_payload,
                       ef.bg_payload[:-2])
    with pytest.raises(DecodeError):
        decode_frame(bad)


def test_container_layout_is_pinned():
    """The serialized header must match the external interface byte map."""
    frame = _frame(w=64, h=48, roi=RoiBox(16, 8, 24, 16))
    ef = encode_frame(frame, qf=37)
    data = ef.to_bytes()
    assert data[0:4] == b"ROI1"
    assert data[4] == 1                                   # version
    assert int.from_bytes(data[5:7], "big") == 64         # width
    assert int.from_bytes(data[7:9], "big") == 48         # height
    aligned = frame.roi.snap_outward(64, 48)
    assert int.from_bytes(data[9:11], "big") == aligned.x0
    assert int.from_bytes(data[11:13], "big") == aligned.y0
    assert int.from_bytes(data[13:15], "big") == aligned.w
    assert int.from_bytes(data[15:17], "big") == aligned.h
    assert data[17] == 37                                 # qf
    roi_len = int.from_bytes(data[18:22], "big")
    bg_len = int.from_bytes(data[22:26], "big")
    assert roi_len == aligned.area == len(ef.roi_payload)
    assert bg_len == len(ef.bg_payload)
    assert len(data) == 26 + roi_len + bg_len == ef.total_bytes


def test_container_roundtrip_bit_exact():
    ef = encode_frame(_frame(), qf=64)
    back = EncodedFrame.from_bytes(ef.to_bytes())
    assert back == ef
    assert back.to_bytes() == ef.to_bytes()


def test_chroma_frame_roundtrip():
    rng = np.random.default_rng(5)
    luma = rng.integers(0, 256, size=(48, 64), dtype=np.int64).astype(np.uint8)
    cb = rng.integers(0, 256, size=(24, 32), dtype=np.int64).astype(np.uint8)
    cr = rng.integers(0, 256, size=(24, 32), dtype=np.int64).astype(np.uint8)
    frame = Frame(planes=(luma, cb, cr), roi=RoiBox(8, 8, 16, 16))
    ef = encode_frame(frame, qf=80)
    assert ef.version == 2
    back = EncodedFrame.from_bytes(ef.to_bytes())
    assert back == ef
    dec = decode_frame(ef)
    assert len(dec.planes) == 3
    assert dec.planes[1].shape == cb.shape
    r = frame.roi.snap_outward(64, 48)
    assert np.array_equal(dec.luma[r.y0:r.y1, r.x0:r.x1],
                          frame.luma[r.y0:r.y1, r.x0:r.x1])


def test_size_monotone_in_qf_on_corpus(corpus_frames):
    violations = 0
    comparisons = 0
    for frame in corpus_frames.frames[:6]:
        sizes = [encode_frame(frame, qf=qf).total_bytes
                 for qf in range(100, 0, -10)]
        for larger_qf, smaller_qf in zip(sizes, sizes[1:]):
            comparisons += 1
            if smaller_qf > larger_qf:
                violations += 1
    assert violations / comparisons < 0.01


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=100), st.integers(min_value=0, max_value=2 ** 31))
def test_encode_deterministic_for_fixed_inputs(qf, seed):
    frame = _frame(seed=seed % 7)
    assert encode_frame(frame, qf=qf).to_bytes() == encode_frame(frame, qf=qf).to_bytes()


def test_pad_to_block_multiple():
    plane = np.arange(30 * 22, dtype=np.uint8).reshape(22, 30)
    padded = codec.pad_to_block_multiple(plane)
    assert padded.shape == (24, 32)
    assert np.array_equal(padded[:22, :30], plane)
    assert np.array_equal(padded[:, 30], padded[:, 29])  # edge replication

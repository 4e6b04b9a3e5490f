import numpy as np
import pytest
from PIL import Image

from roi_adapt import dataset
from roi_adapt.codec import compression_ratio, encode_frame
from roi_adapt.dataset import (FrameSet, load_frames, save_frames, synth_frames)


def test_synth_deterministic():
    a = synth_frames(seed=4, n=3, width=160, height=128)
    b = synth_frames(seed=4, n=3, width=160, height=128)
    for fa, fb in zip(a.frames, b.frames):
        assert np.array_equal(fa.luma, fb.luma)
        assert fa.roi == fb.roi


def test_synth_roi_area_fraction_in_bounds():
    fs = synth_frames(seed=5, n=16, width=320, height=256)
    for f in fs.frames:
        frac = f.roi.area / (f.width * f.height)
        assert dataset.ROI_AREA_MIN <= frac <= dataset.ROI_AREA_MAX
        assert f.roi.x0 % 8 == 0 and f.roi.w % 8 == 0


def test_synth_rejects_empty():
    with pytest.raises(ValueError):
        synth_frames(seed=0, n=0)


def test_synth_pads_to_block_multiple():
    fs = synth_frames(seed=6, n=1, width=150, height=122)
    f = fs[0]
    assert f.width % 8 == 0 and f.height % 8 == 0
    assert f.orig_size == (150, 122)


def test_frameset_nonempty_invariant():
    with pytest.raises(ValueError):
        FrameSet(frames=(), origin="hollow")


def test_save_load_roundtrip(tmp_path):
    fs = synth_frames(seed=7, n=3, width=160, height=128)
    ann = save_frames(fs, tmp_path)
    back = load_frames(tmp_path, ann)
    assert len(back) == 3
    for fa, fb in zip(fs.frames, back.frames):
        assert np.array_equal(fa.luma, fb.luma)
        assert fa.roi == fb.roi


def test_load_missing_annotation_rejected(tmp_path):
    fs = synth_frames(seed=8, n=2, width=160, height=128)
    save_frames(fs, tmp_path)
    (tmp_path / "annotations.csv").write_text(
        "frame_index,x0,y0,w,h\n0,0,0,16,16\n"
    )
    with pytest.raises(ValueError, match="missing annotation for frame 1"):
        load_frames(tmp_path, tmp_path / "annotations.csv")


def test_load_out_of_range_annotation_rejected(tmp_path):
    fs = synth_frames(seed=9, n=2, width=160, height=128)
    ann = save_frames(fs, tmp_path)
    with open(ann, "a") as fh:
        fh.write("5,0,0,8,8\n")
    with pytest.raises(ValueError, match="references frame 5"):
        load_frames(tmp_path, ann)


def test_load_roi_outside_frame_rejected(tmp_path):
    fs = synth_frames(seed=10, n=1, width=160, height=128)
    save_frames(fs, tmp_path)
    (tmp_path / "annotations.csv").write_text(
        "frame_index,x0,y0,w,h\n0,100,0,100,50\n"
    )
    with pytest.raises(ValueError, match="exceeds frame bounds"):
        load_frames(tmp_path, tmp_path / "annotations.csv")


def test_load_full_frame_roi_accepted(tmp_path):
    fs = synth_frames(seed=11, n=1, width=160, height=128)
    save_frames(fs, tmp_path)
    (tmp_path / "annotations.csv").write_text(
        "frame_index,x0,y0,w,h\n0,0,0,160,128\n"
    )
    back = load_frames(tmp_path, tmp_path / "annotations.csv")
    assert back[0].roi.area == 160 * 128


def test_load_pads_odd_dimensions(tmp_path):
    rng = np.random.default_rng(12)
    img = rng.integers(0, 256, size=(30, 42), dtype=np.int64).astype(np.uint8)
    Image.fromarray(img, mode="L").save(tmp_path / "frame_0000.png")
    (tmp_path / "annotations.csv").write_text(
        "frame_index,x0,y0,w,h\n0,3,5,20,11\n"
    )
    back = load_frames(tmp_path, tmp_path / "annotations.csv")
    f = back[0]
    assert (f.width, f.height) == (48, 32)
    assert f.orig_size == (42, 30)
    assert np.array_equal(f.luma[:30, :42], img)
    # ROI snapped outward to block alignment
    assert f.roi.x0 == 0 and f.roi.y0 == 0
    assert f.roi.w == 24 and f.roi.h == 16


def test_corpus_compresses_harder_at_low_qf(corpus_frames):
    lo = np.mean([compression_ratio(f, encode_frame(f, qf=10))
                  for f in corpus_frames.frames[:6]])
    hi = np.mean([compression_ratio(f, encode_frame(f, qf=90))
                  for f in corpus_frames.frames[:6]])
    assert lo > hi

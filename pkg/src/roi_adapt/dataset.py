"""Frame sources: annotated image directories and synthetic frames.

The synthetic generator builds surgical-video-like content with zero
external assets: a smooth low-frequency background plus a high-detail
ROI patch whose box covers 10-40% of the frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .codec import Frame, RoiBox, pad_to_block_multiple

_IMAGE_SUFFIXES = (".png", ".ppm", ".pgm")

ROI_AREA_MIN = 0.10
ROI_AREA_MAX = 0.40


@dataclass(frozen=True)
class FrameSet:
    frames: tuple
    origin: str

    def __post_init__(self):
        if not self.frames:
            raise ValueError("frame set must not be empty")

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, idx: int) -> Frame:
        return self.frames[idx]


def _load_annotations(path: Path) -> dict[int, RoiBox]:
    boxes: dict[int, RoiBox] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("frame_index"):
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ValueError(f"{path}:{lineno}: expected 5 columns, got {len(parts)}")
        idx, x0, y0, w, h = (int(p) for p in parts)
        if idx in boxes:
            raise ValueError(f"{path}:{lineno}: duplicate annotation for frame {idx}")
        boxes[idx] = RoiBox(x0, y0, w, h)
    return boxes


def load_frames(directory: str | Path, annotations_path: str | Path) -> FrameSet:
    """Load PNG/PPM images with a `frame_index,x0,y0,w,h` annotation CSV.

    Frames are padded to 8-pixel multiples by edge replication and ROI
    boxes snapped outward to block alignment.
    """
    directory = Path(directory)
    paths = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not paths:
        raise ValueError(f"no images found in {directory}")
    boxes = _load_annotations(Path(annotations_path))
    for idx in boxes:
        if idx >= len(paths):
            raise ValueError(
                f"annotation references frame {idx} but only {len(paths)} images exist"
            )
    frames = []
    for i, p in enumerate(paths):
        if i not in boxes:
            raise ValueError(f"missing annotation for frame {i} ({p.name})")
        luma = np.asarray(Image.open(p).convert("L"), dtype=np.uint8)
        h0, w0 = luma.shape
        roi = boxes[i]
        roi.validate_within(w0, h0)
        padded = pad_to_block_multiple(luma)
        snapped = roi.snap_outward(padded.shape[1], padded.shape[0])
        frames.append(Frame(planes=(padded,), roi=snapped, orig_size=(w0, h0)))
    return FrameSet(frames=tuple(frames), origin=f"loaded dir={directory}")


def save_frames(frameset: FrameSet, directory: str | Path) -> Path:
    """Write frames as PNGs plus an annotations.csv; inverse of load_frames."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = ["frame_index,x0,y0,w,h"]
    for i, frame in enumerate(frameset.frames):
        Image.fromarray(frame.luma, mode="L").save(directory / f"frame_{i:04d}.png")
        r = frame.roi
        lines.append(f"{i},{r.x0},{r.y0},{r.w},{r.h}")
    ann = directory / "annotations.csv"
    ann.write_text("\n".join(lines) + "\n")
    return ann


def _smooth_background(rng: np.random.Generator, width: int, height: int,
                       noise_sigma: float) -> np.ndarray:
    """Low-frequency shading plus mid-frequency texture.

    The texture wavelengths (9-24 px) sit where coarse quantization bites:
    they survive high quality factors nearly intact but are wiped out at
    low ones, giving the corpus a real quality/size tradeoff.
    """
    yy, xx = np.mgrid[0:height, 0:width]
    img = np.full((height, width), 128.0)
    for amp in (42.0, 24.0):
        fx, fy = rng.uniform(0.4, 2.2, size=2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        img += amp * np.sin(2.0 * np.pi * (fx * xx / width + fy * yy / height) + phase)
    envelope = 0.5 + 0.5 * np.sin(
        2.0 * np.pi * (xx / width + yy / height) * rng.uniform(0.5, 1.5)
        + rng.uniform(0.0, 2.0 * np.pi)
    )
    for amp in (26.0, 15.0):
        wavelength = rng.uniform(9.0, 24.0)
        angle = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        k = 2.0 * np.pi / wavelength
        img += amp * envelope * np.sin(
            k * (np.cos(angle) * xx + np.sin(angle) * yy) + phase
        )
    img += rng.normal(0.0, noise_sigma, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _pick_roi_box(rng: np.random.Generator, width: int, height: int) -> RoiBox:
    area = width * height
    for _ in range(1000):
        frac = rng.uniform(ROI_AREA_MIN, ROI_AREA_MAX)
        aspect = rng.uniform(0.6, 1.6)
        w = int(round(np.sqrt(frac * area * aspect) / 8.0)) * 8
        h = int(round(np.sqrt(frac * area / aspect) / 8.0)) * 8
        w = min(max(w, 8), width)
        h = min(max(h, 8), height)
        if ROI_AREA_MIN <= (w * h) / area <= ROI_AREA_MAX:
            x0 = int(rng.integers(0, (width - w) // 8 + 1)) * 8
            y0 = int(rng.integers(0, (height - h) // 8 + 1)) * 8
            return RoiBox(x0, y0, w, h)
    raise RuntimeError(f"could not place an ROI box inside {width}x{height}")


def synth_frames(seed: int, n: int, width: int = 320, height: int = 256) -> FrameSet:
    """Deterministic synthetic frames: smooth background, high-detail ROI."""
    if n <= 0:
        raise ValueError("frame count must be positive")
    if width < 16 or height < 16:
        raise ValueError("frames must be at least 16x16")
    rng = np.random.default_rng(seed)
    pw = int(np.ceil(width / 8.0)) * 8
    ph = int(np.ceil(height / 8.0)) * 8
    frames = []
    for _ in range(n):
        luma = _smooth_background(rng, pw, ph, noise_sigma=0.3)
        roi = _pick_roi_box(rng, pw, ph)
        texture = rng.integers(0, 256, size=(roi.h, roi.w), dtype=np.int64)
        luma[roi.y0:roi.y1, roi.x0:roi.x1] = texture.astype(np.uint8)
        frames.append(Frame(planes=(luma,), roi=roi, orig_size=(width, height)))
    origin = f"synthetic seed={seed} n={n} dims={width}x{height}"
    return FrameSet(frames=tuple(frames), origin=origin)

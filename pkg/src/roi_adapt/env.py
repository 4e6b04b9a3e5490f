"""The per-frame adaptation MDP.

Each step maps an agent action {ROI width growth, ROI height growth,
background quality} onto a concrete encode of the current frame, then
scores it: transmission delay from size and current throughput, quality
from SSIM, and a scalar reward. States carry the previous step's delay
and quality plus the current throughput, min-max normalized.

Size and quality come either from real encodes ("measured") or from the
fitted size polynomial plus a per-frame quality cache ("regression", fast
enough for training).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quality, sizemodel
from .codec import RoiBox, encode_frame, decode_frame
from .dataset import FrameSet
from .traces import ThroughputTrace

STATE_DIM = 3
ACTION_DIM = 3

REWARD_PAPER = "paper"
REWARD_RATIONAL = "min-delay-max-quality"

# Threshold constant quoted by the source study for its two-branch reward;
# its units do not match Mb/s traces, so it is only reachable via the
# "paper" threshold preset.
PAPER_REWARD_THRESHOLD = 103076.0

EPISODE_LOG_COLUMNS = ("step", "throughput_mbps", "roi_w", "roi_h", "qf",
                       "bytes", "delay_s", "ssim", "reward")

DEFAULT_QUALITY_CACHE_QFS = (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)


class EpisodeExhausted(RuntimeError):
    """step() was called after the episode ended."""


@dataclass(frozen=True)
class Bounds:
    lo: float
    hi: float

    def normalize(self, v: float) -> float:
        if self.hi <= self.lo:
            return 0.0
        return min(1.0, max(0.0, (v - self.lo) / (self.hi - self.lo)))


@dataclass(frozen=True)
class NormBounds:
    """Min-max normalization ranges (defaults: the evaluation regime's
    observed delay/quality/throughput extrema)."""

    delay: Bounds = field(default_factory=lambda: Bounds(0.0791, 0.2541))
    quality: Bounds = field(default_factory=lambda: Bounds(0.6144, 0.9839))
    throughput: Bounds = field(default_factory=lambda: Bounds(1.7912, 9.5001))

    def to_dict(self) -> dict:
        return {
            "delay": [self.delay.lo, self.delay.hi],
            "quality": [self.quality.lo, self.quality.hi],
            "throughput": [self.throughput.lo, self.throughput.hi],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormBounds":
        return cls(delay=Bounds(*d["delay"]), quality=Bounds(*d["quality"]),
                   throughput=Bounds(*d["throughput"]))


@dataclass(frozen=True)
class Action:
    """ROI width/height growth fractions and normalized quality factor."""

    x_grow: float
    y_grow: float
    qf_norm: float

    def __post_init__(self):
        for name in ("x_grow", "y_grow", "qf_norm"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0 or not math.isfinite(v):
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def from_vector(cls, v) -> "Action":
        return cls(float(v[0]), float(v[1]), float(v[2]))


@dataclass(frozen=True)
class StateObs:
    delay: float
    quality: float
    throughput: float
    norm_delay: float
    norm_quality: float
    norm_throughput: float

    @classmethod
    def build(cls, delay: float, qual: float, throughput: float,
              bounds: NormBounds) -> "StateObs":
        return cls(
            delay=delay, quality=qual, throughput=throughput,
            norm_delay=bounds.delay.normalize(delay),
            norm_quality=bounds.quality.normalize(qual),
            norm_throughput=bounds.throughput.normalize(throughput),
        )

    def vector(self) -> np.ndarray:
        return np.array([self.norm_delay, self.norm_quality,
                         self.norm_throughput])


@dataclass(frozen=True)
class StepOutcome:
    next_state: StateObs
    reward: float
    info: dict


@dataclass(frozen=True)
class EnvConfig:
    size_mode: str = "measured"                 # measured | regression
    reward_preset: str = REWARD_RATIONAL        # or REWARD_PAPER
    reward_threshold: float | str = "midpoint"  # number | midpoint | paper
    bounds: NormBounds = field(default_factory=NormBounds)
    episode_len: int | None = None
    quality_cache_qfs: tuple = DEFAULT_QUALITY_CACHE_QFS

    def __post_init__(self):
        if self.size_mode not in ("measured", "regression"):
            raise ValueError(f"unknown size_mode {self.size_mode!r}")
        if self.reward_preset not in (REWARD_PAPER, REWARD_RATIONAL):
            raise ValueError(f"unknown reward preset {self.reward_preset!r}")


def apply_action(roi: RoiBox, frame_w: int, frame_h: int,
                 action: Action) -> tuple[RoiBox, int]:
    """Grow the ROI about its center, fit it inside the frame, snap to
    blocks, and map qf_norm onto [1, 100].

    Growth is a fraction of the remaining room per axis, so (1, 1, .)
    always reaches the full frame; the grown box is shifted (not
    truncated) back inside the frame, which preserves its size.
    """
    w2 = roi.w + action.x_grow * (frame_w - roi.w)
    h2 = roi.h + action.y_grow * (frame_h - roi.h)
    cx = roi.x0 + roi.w / 2.0
    cy = roi.y0 + roi.h / 2.0
    x0 = min(max(cx - w2 / 2.0, 0.0), frame_w - w2)
    y0 = min(max(cy - h2 / 2.0, 0.0), frame_h - h2)
    sx0 = int(math.floor(x0 / 8.0)) * 8
    sy0 = int(math.floor(y0 / 8.0)) * 8
    sx1 = min(frame_w, int(math.ceil((x0 + w2) / 8.0)) * 8)
    sy1 = min(frame_h, int(math.ceil((y0 + h2) / 8.0)) * 8)
    qf = max(1, round(action.qf_norm * 100))
    return RoiBox(sx0, sy0, sx1 - sx0, sy1 - sy0), qf


def reward_branches(gamma: float, lam: float) -> tuple[float, float]:
    """Both branches of the two-branch preset: (below, at-or-above)."""
    return (1.0 / gamma + 1.0 / lam), (gamma + lam)


def compute_reward(preset: str, gamma: float, lam: float, throughput: float,
                   threshold: float, gamma_max: float) -> float:
    if preset == REWARD_PAPER:
        below, above = reward_branches(gamma, lam)
        return below if throughput < threshold else above
    # min-delay-max-quality: equal-weight blend of delay headroom and SSIM
    return 0.5 * (1.0 - gamma / gamma_max) + 0.5 * lam


class StreamEnv:
    """Single-threaded environment over an immutable frame set and trace."""

    state_dim = STATE_DIM
    action_dim = ACTION_DIM

    def __init__(self, frames: FrameSet, trace: ThroughputTrace,
                 config: EnvConfig | None = None,
                 size_model: sizemodel.PolynomialModel | None = None):
        self.frames = frames
        self.trace = trace
        self.config = config or EnvConfig()
        self.size_model = size_model
        if self.config.size_mode == "regression" and size_model is None:
            raise ValueError("regression size mode requires a fitted size model")
        self.episode_len = (self.config.episode_len
                            if self.config.episode_len is not None
                            else min(len(frames), len(trace)))
        if self.episode_len <= 0:
            raise ValueError("episode length must be positive")
        self.threshold = self._resolve_threshold(self.config.reward_threshold)
        self._quality_cache: dict[int, np.ndarray] = {}
        self._state: StateObs | None = None
        self._steps_done = 0
        self.episode_rows: list[tuple] = []

    def _resolve_threshold(self, spec) -> float:
        if spec == "midpoint":
            return 0.5 * (self.trace.min_mbps + self.trace.max_mbps)
        if spec == "paper":
            return PAPER_REWARD_THRESHOLD
        return float(spec)

    @property
    def exhausted(self) -> bool:
        return self._steps_done >= self.episode_len

    def _measure(self, frame, roi: RoiBox, qf: int) -> tuple[float, float]:
        ef = encode_frame(frame, roi, qf)
        lam = quality.ssim(frame.luma, decode_frame(ef).luma).mean_ssim
        return float(ef.total_bytes), lam

    def _cached_quality(self, frame_idx: int, qf: int) -> float:
        lams = self._quality_cache.get(frame_idx)
        if lams is None:
            frame = self.frames[frame_idx]
            lams = np.array([
                self._measure(frame, frame.roi, q)[1]
                for q in self.config.quality_cache_qfs
            ])
            self._quality_cache[frame_idx] = lams
        return float(np.interp(qf, self.config.quality_cache_qfs, lams))

    def _size_and_quality(self, frame_idx: int, roi: RoiBox,
                          qf: int) -> tuple[float, float]:
        frame = self.frames[frame_idx]
        if self.config.size_mode == "measured":
            return self._measure(frame, roi, qf)
        nbytes = sizemodel.eval_size(self.size_model, roi.area, qf)
        return nbytes, self._cached_quality(frame_idx, qf)

    def reset(self) -> StateObs:
        """Rewind cursors; seed previous-step delay/quality from a
        bootstrap encode of frame 0 at its original ROI and qf=100."""
        self._steps_done = 0
        self.episode_rows = []
        t0 = self.trace.at(0)
        nbytes, lam = self._size_and_quality(0, self.frames[0].roi, 100)
        gamma = nbytes * 8.0 / (t0 * 1e6)
        self._state = StateObs.build(gamma, lam, t0, self.config.bounds)
        return self._state

    def step(self, action: Action) -> StepOutcome:
        if self._state is None:
            raise RuntimeError("reset() must be called before step()")
        if self.exhausted:
            raise EpisodeExhausted(
                f"episode ended after {self.episode_len} steps"
            )
        t = self._steps_done
        frame_idx = t % len(self.frames)
        frame = self.frames[frame_idx]
        throughput = self.trace.at(t)

        roi_eff, qf = apply_action(frame.roi, frame.width, frame.height, action)
        nbytes, lam = self._size_and_quality(frame_idx, roi_eff, qf)
        gamma = nbytes * 8.0 / (throughput * 1e6)
        reward = compute_reward(
            self.config.reward_preset, gamma, lam, throughput,
            self.threshold, self.config.bounds.delay.hi,
        )

        self._steps_done += 1
        next_state = StateObs.build(
            gamma, lam, self.trace.at(self._steps_done), self.config.bounds
        )
        below, above = reward_branches(gamma, lam)
        info = {
            "encoded_bytes": nbytes,
            "effective_roi": roi_eff,
            "qf_used": qf,
            "size_mode": self.config.size_mode,
            "reward_below_branch": below,
            "reward_above_branch": above,
            "threshold": self.threshold,
        }
        self.episode_rows.append(
            (t, throughput, roi_eff.w, roi_eff.h, qf, nbytes, gamma, lam, reward)
        )
        self._state = next_state
        return StepOutcome(next_state=next_state, reward=reward, info=info)

    # vector protocol for the learner (actions arrive in [0, 1]^3)

    def reset_vec(self) -> np.ndarray:
        return self.reset().vector()

    def step_vec(self, a01: np.ndarray) -> tuple[np.ndarray, float, bool]:
        out = self.step(Action.from_vector(np.clip(a01, 0.0, 1.0)))
        return out.next_state.vector(), out.reward, self.exhausted

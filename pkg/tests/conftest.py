from __future__ import annotations

import numpy as np
import pytest

from roi_adapt import dataset, traces


class ToyBanditEnv:
    """One-dimensional stateless env: reward peaks at action 0.3.

    Actions arrive in [0, 1] like the real env and are mapped back to
    [-1, 1] before scoring.
    """

    state_dim = 1
    action_dim = 1

    def __init__(self, episode_len: int = 250, target: float = 0.3):
        self.episode_len = episode_len
        self.target = target
        self._steps = 0

    def reset_vec(self) -> np.ndarray:
        self._steps = 0
        return np.zeros(1)

    def step_vec(self, a01):
        a = 2.0 * float(a01[0]) - 1.0
        r = -((a - self.target) ** 2)
        self._steps += 1
        return np.zeros(1), r, self._steps >= self.episode_len


def finite_difference(f, vec: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    grad = np.zeros_like(vec)
    for i in range(vec.size):
        up = vec.copy()
        up[i] += h
        down = vec.copy()
        down[i] -= h
        grad[i] = (f(up) - f(down)) / (2.0 * h)
    return grad


def grad_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)


def smooth_trailing(vals, window: int = 10) -> list[float]:
    out = []
    for i in range(len(vals)):
        lo = max(0, i - window + 1)
        out.append(float(np.mean(vals[lo:i + 1])))
    return out


@pytest.fixture(scope="session")
def small_frames() -> dataset.FrameSet:
    return dataset.synth_frames(seed=1, n=6, width=160, height=128)


@pytest.fixture(scope="session")
def small_trace() -> traces.ThroughputTrace:
    return traces.synth_trace(seed=2, n=64, step_sigma=0.4)


@pytest.fixture(scope="session")
def corpus_frames() -> dataset.FrameSet:
    """The default-config corpus used by the corpus-level checks."""
    return dataset.synth_frames(seed=11, n=12, width=320, height=256)

"""Throughput time series: measured trace files and synthetic walks.

Traces are (t_seconds, throughput_mbps) samples with strictly increasing
timestamps and positive throughput. Episodes may outrun a trace, so
indexed access wraps cyclically.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_MIN_MBPS = 1.7912
DEFAULT_MAX_MBPS = 9.5001

_HEADER = "t_seconds,throughput_mbps"


class TraceParseError(ValueError):
    """Trace file rejected; message carries the offending line number."""


@dataclass(frozen=True)
class ThroughputTrace:
    times: np.ndarray
    mbps: np.ndarray
    source: str = "measured"

    def __post_init__(self):
        if self.times.size == 0:
            raise ValueError("trace must contain at least one sample")
        if self.times.size != self.mbps.size:
            raise ValueError("time and throughput arrays differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if np.any(self.mbps <= 0):
            raise ValueError("throughput must be positive everywhere")

    def __len__(self) -> int:
        return int(self.times.size)

    def at(self, step_index: int) -> float:
        """Throughput at a step index, wrapping cyclically past the end."""
        return float(self.mbps[step_index % len(self)])

    @property
    def min_mbps(self) -> float:
        return float(self.mbps.min())

    @property
    def max_mbps(self) -> float:
        return float(self.mbps.max())


def load_trace(path: str | Path) -> ThroughputTrace:
    """Parse a `t_seconds,throughput_mbps` CSV (header optional)."""
    times: list[float] = []
    mbps: list[float] = []
    prev_t = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == _HEADER:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceParseError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
        try:
            t = float(parts[0])
            v = float(parts[1])
        except ValueError:
            raise TraceParseError(f"{path}:{lineno}: malformed number") from None
        if prev_t is not None and t <= prev_t:
            raise TraceParseError(
                f"{path}:{lineno}: timestamp {t} not greater than previous {prev_t}"
            )
        if v <= 0:
            raise TraceParseError(f"{path}:{lineno}: nonpositive throughput {v}")
        prev_t = t
        times.append(t)
        mbps.append(v)
    if not times:
        raise TraceParseError(f"{path}: no samples found")
    return ThroughputTrace(np.array(times), np.array(mbps), source="measured")


def save_trace(trace: ThroughputTrace, path: str | Path,
               header_comments: list[str] | None = None) -> None:
    lines = [f"# {c}" for c in (header_comments or [])]
    lines.append(_HEADER)
    for t, v in zip(trace.times, trace.mbps):
        lines.append(f"{float(t)!r},{float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def synth_trace(seed: int, n: int, min_mbps: float = DEFAULT_MIN_MBPS,
                max_mbps: float = DEFAULT_MAX_MBPS,
                step_sigma: float = 0.5) -> ThroughputTrace:
    """Reflected Gaussian random walk inside [min_mbps, max_mbps].

    Starts at the midpoint; fully determined by the arguments.
    """
    if n <= 0:
        raise ValueError("trace length must be positive")
    if not 0 < min_mbps <= max_mbps:
        raise ValueError(f"need 0 < min <= max, got [{min_mbps}, {max_mbps}]")
    if step_sigma < 0:
        raise ValueError("step_sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    vals = np.empty(n)
    x = 0.5 * (min_mbps + max_mbps)
    for i in range(n):
        vals[i] = x
        x += rng.normal(0.0, step_sigma) if step_sigma > 0 else 0.0
        while x < min_mbps or x > max_mbps:
            if x < min_mbps:
                x = 2.0 * min_mbps - x
            else:
                x = 2.0 * max_mbps - x
    source = (f"synthetic seed={seed} n={n} min={min_mbps} "
              f"max={max_mbps} step_sigma={step_sigma}")
    return ThroughputTrace(np.arange(n, dtype=np.float64), vals, source=source)

"""Cubic frame-size regression S(d, q) and the per-frame delay it implies.

The model maps ROI area d (pixels squared) and background quality factor q
to a predicted container size in bytes via a full bivariate cubic (ten
monomials). Fitting is ordinary least squares with column scaling; the
delay is simply predicted bits over throughput.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

# (d exponent, q exponent) per coefficient, in persistence order.
COEFFICIENT_NAMES = ("p00", "p10", "p01", "p20", "p11",
                     "p02", "p30", "p21", "p12", "p03")
_POWERS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1),
           (0, 2), (3, 0), (2, 1), (1, 2), (0, 3))

X_SEMANTICS = "d=roi_area_px2,q=quality_factor"

SIZE_FLOOR_BYTES = 1.0

_clamp_events = 0


class FitError(ValueError):
    """Raised when the regression design matrix cannot be solved."""


@dataclass(frozen=True)
class PolynomialModel:
    p00: float
    p10: float
    p01: float
    p20: float
    p11: float
    p02: float
    p30: float
    p21: float
    p12: float
    p03: float
    r_squared: float
    x_semantics: str = X_SEMANTICS
    n_samples: int = 0

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in COEFFICIENT_NAMES])


@dataclass(frozen=True)
class SizeSample:
    roi_w: int
    roi_h: int
    qf: int
    measured_bytes: int

    def __post_init__(self):
        if self.measured_bytes <= 0:
            raise ValueError(f"measured_bytes must be positive, got {self.measured_bytes}")


# Coefficients reported by the source study's MATLAB fit (fixture
# "paper-2022"); used only to pin the evaluator, never as our corpus model.
PAPER_2022 = PolynomialModel(
    p00=6.256e4, p10=-0.2356, p01=432.4, p20=1.412e-6, p11=0.001398,
    p02=-8.561, p30=-2.637e-12, p21=-8.87e-9, p12=6.147e-6, p03=0.04034,
    r_squared=0.822, n_samples=0,
)


def _design_row(d: float, q: float) -> np.ndarray:
    return np.array([d ** pd * q ** pq for pd, pq in _POWERS])


def eval_size(m: PolynomialModel, d: float, q: float,
              floor: float = SIZE_FLOOR_BYTES) -> float:
    """Predicted frame size in bytes, clamped below at ``floor``."""
    if d < 0:
        raise ValueError(f"ROI area must be nonnegative, got {d}")
    if not 0 <= q <= 100:
        raise ValueError(f"quality factor must lie in [0, 100], got {q}")
    value = float(m.coefficients @ _design_row(float(d), float(q)))
    if value < floor:
        global _clamp_events
        _clamp_events += 1
        return floor
    return value


def clamp_count() -> int:
    """How many eval_size calls hit the floor clamp (process-wide)."""
    return _clamp_events


def reset_clamp_count() -> None:
    global _clamp_events
    _clamp_events = 0


def fit_polynomial(samples: list[SizeSample]) -> PolynomialModel:
    """Least-squares fit of the ten cubic monomials in (d, q).

    Columns are scaled to unit maximum before solving so the wildly
    different monomial magnitudes do not wreck conditioning.
    """
    if len(samples) < 10:
        raise FitError(f"need at least 10 samples, got {len(samples)}")
    d = np.array([s.roi_w * s.roi_h for s in samples], dtype=np.float64)
    q = np.array([s.qf for s in samples], dtype=np.float64)
    y = np.array([s.measured_bytes for s in samples], dtype=np.float64)

    design = np.stack([d ** pd * q ** pq for pd, pq in _POWERS], axis=1)
    scale = np.abs(design).max(axis=0)
    scale[scale == 0.0] = 1.0
    scaled = design / scale

    rank = np.linalg.matrix_rank(scaled)
    if rank < len(COEFFICIENT_NAMES):
        _, _, vt = np.linalg.svd(scaled)
        null = np.abs(vt[rank:]).sum(axis=0)
        bad = [n for n, w in zip(COEFFICIENT_NAMES, null) if w > 1e-8]
        raise FitError(
            f"design matrix is rank deficient ({rank}/10); "
            f"dependent monomials: {', '.join(bad)}"
        )

    coefs_scaled, _, _, _ = np.linalg.lstsq(scaled, y, rcond=None)
    coefs = coefs_scaled / scale

    residual = y - design @ coefs
    ss_res = float(residual @ residual)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0

    named = dict(zip(COEFFICIENT_NAMES, (float(c) for c in coefs)))
    return PolynomialModel(**named, r_squared=r_squared,
                           n_samples=len(samples))


def predict_delay(m: PolynomialModel, d: float, q: float,
                  throughput_bps: float) -> float:
    """Transmission delay in seconds: predicted bytes * 8 / throughput."""
    if throughput_bps <= 0:
        raise ValueError(f"throughput must be positive, got {throughput_bps}")
    return eval_size(m, d, q) * 8.0 / throughput_bps


def model_to_json(m: PolynomialModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(asdict(m), indent=2, sort_keys=True) + "\n")


def model_from_json(path: str | Path) -> PolynomialModel:
    data = json.loads(Path(path).read_text())
    return PolynomialModel(**data)


def samples_to_csv(samples: list[SizeSample], path: str | Path,
                   header_comments: list[str] | None = None) -> None:
    lines = [f"# {c}" for c in (header_comments or [])]
    lines.append("roi_w,roi_h,qf,bytes")
    for s in samples:
        lines.append(f"{s.roi_w},{s.roi_h},{s.qf},{s.measured_bytes}")
    Path(path).write_text("\n".join(lines) + "\n")


def samples_from_csv(path: str | Path) -> list[SizeSample]:
    samples = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("roi_w"):
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
        w, h, qf, nbytes = (int(p) for p in parts)
        samples.append(SizeSample(w, h, qf, nbytes))
    return samples

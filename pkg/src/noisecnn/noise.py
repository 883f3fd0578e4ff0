"""Additive training-set corruption: white Gaussian noise and a linear baseline ramp."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from noisecnn import rng
from noisecnn.data import SignalRecord, Window

NONE = "NONE"
AWGN = "AWGN"
LINEAR = "LINEAR"
NOISE_KINDS = (NONE, AWGN, LINEAR)


@dataclass(frozen=True)
class NoiseSpec:
    """``strength`` is sigma (amplitude units) for AWGN and the slope per sample for LINEAR."""

    kind: str = NONE
    strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not self.strength >= 0:
            raise ValueError(f"noise strength must be >= 0, got {self.strength}")

    @property
    def is_identity(self) -> bool:
        return self.kind == NONE or self.strength == 0

    @property
    def label(self) -> str:
        if self.kind == NONE:
            return "none"
        return f"{self.kind.lower()}_{self.strength:g}"


def apply_awgn(values, sigma: float, seed: int) -> np.ndarray:
    """Add i.i.d. N(0, sigma) samples drawn from the stream keyed by ``seed``."""
    if not sigma >= 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    x = np.array(values, dtype=np.float64)
    if sigma == 0:
        return x
    return x + sigma * rng.gaussian(rng.stream(seed), x.size).reshape(x.shape)


def apply_linear(values, slope: float, x_scale: float = 1.0) -> np.ndarray:
    """Add the ramp ``slope * i * x_scale`` over sample index ``i`` (0-based)."""
    if not slope >= 0:
        raise ValueError(f"slope must be >= 0, got {slope}")
    x = np.array(values, dtype=np.float64)
    if slope == 0:
        return x
    return x + slope * (np.arange(x.shape[-1]) * x_scale)


def apply_noise(values, spec: NoiseSpec, seed: int | None = None, x_scale: float = 1.0) -> np.ndarray:
    if spec.kind == AWGN:
        return apply_awgn(values, spec.strength, spec.seed if seed is None else seed)
    if spec.kind == LINEAR:
        return apply_linear(values, spec.strength, x_scale)
    return np.array(values, dtype=np.float64)


def window_seed(run_seed: int, position: int) -> int:
    return rng.stable_hash("awgn-window", run_seed, position)


def corrupt_training_set(windows, spec: NoiseSpec, run_seed: int, x_scale: float = 1.0) -> list[Window]:
    """Corrupt every training window; the AWGN seed of window ``i`` depends only on (run_seed, i)."""
    out = []
    for i, w in enumerate(windows):
        if spec.is_identity:
            values = w.values.copy()
        else:
            values = apply_noise(w.values, spec, seed=window_seed(run_seed, i), x_scale=x_scale)
        out.append(Window(values, w.label, w.source_id))
    return out


def preview(record: SignalRecord, specs, out_path, x_scale: float = 1.0) -> Path:
    """Write ``index, clean, <one column per spec>`` for one record."""
    if record.samples.size == 0:
        raise ValueError("record is empty")
    columns = [apply_noise(record.samples, s, x_scale=x_scale) for s in specs]
    names = [s.label for s in specs]
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "clean", *names])
        for i, clean in enumerate(record.samples):
            w.writerow([i, repr(float(clean)), *(repr(float(col[i])) for col in columns)])
    return out_path

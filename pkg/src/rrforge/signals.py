"""Uniformly sampled signal containers, resampling, windowing, scaling.

Everything downstream (quality gate, ICA, ground truth, model input) works on
fixed-rate windows produced here. Operations are pure: they return new arrays
and never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

# Canonical processing rate and window geometry. Wrist and chest streams are
# brought to PROCESS_RATE before any windowing; a segment window is exactly
# WINDOW_S seconds = SEGMENT_SAMPLES samples at that rate.
PROCESS_RATE = 100.0
WINDOW_S = 32.0
SEGMENT_SAMPLES = 3200


@dataclass
class SampledSignal:
    """One channel sampled at a constant rate.

    samples: 1-D float64 array
    rate: sampling rate in Hz, > 0
    start_time: timestamp of samples[0] in seconds
    """

    samples: np.ndarray
    rate: float
    start_time: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be 1-D")
        if self.samples.size == 0:
            raise ValueError("samples must be non-empty")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if not np.isfinite(self.rate) or self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        """Span between first and last sample, (n - 1) / rate."""
        return (len(self) - 1) / self.rate if len(self) else 0.0

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) / self.rate


def resample_linear(signal: SampledSignal, target_rate: float) -> SampledSignal:
    """Resample onto a uniform grid at target_rate by linear interpolation.

    Output length is round((n - 1) * target_rate / rate) + 1, so the spanned
    duration is preserved to within one output sample period. Each output
    sample lies on the segment between its bracketing input samples; an output
    time that lands past the final input sample (possible when the length
    rounds up) clamps to the final input value.
    """
    if not np.isfinite(target_rate) or target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    n = len(signal)
    if n < 2:
        raise ValueError("resampling requires at least 2 samples")
    out_len = int(round((n - 1) * target_rate / signal.rate)) + 1
    t_in = np.arange(n) / signal.rate
    t_out = np.arange(out_len) / target_rate
    out = np.interp(t_out, t_in, signal.samples)
    return SampledSignal(out, target_rate, start_time=signal.start_time)


@dataclass
class SegmentWindow:
    """One fixed-length window cut synchronously across channels."""

    start_index: int
    channels: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(next(iter(self.channels.values())))


def _window_samples(rate: float, seconds: float, what: str) -> int:
    n = seconds * rate
    n_int = int(round(n))
    if n_int < 1 or abs(n - n_int) > 1e-6:
        raise ValueError(f"{what} of {seconds}s is not a whole number of samples at {rate} Hz")
    return n_int


def segment(
    signals: Mapping[str, SampledSignal],
    window_s: float = WINDOW_S,
    stride_s: float | None = None,
) -> list[SegmentWindow]:
    """Cut synchronized fixed-stride windows across equal-rate channels.

    All channels must share rate and length. Yields floor((n - w) / s) + 1
    windows when n >= w, none otherwise; no partial windows.
    """
    if not signals:
        raise ValueError("no channels given")
    rates = {s.rate for s in signals.values()}
    lengths = {len(s) for s in signals.values()}
    if len(rates) != 1:
        raise ValueError(f"channels disagree on rate: {sorted(rates)}")
    if len(lengths) != 1:
        raise ValueError(f"channels disagree on length: {sorted(lengths)}")
    rate = rates.pop()
    n = lengths.pop()
    if stride_s is None:
        stride_s = window_s
    w = _window_samples(rate, window_s, "window")
    s = _window_samples(rate, stride_s, "stride")
    if n < w:
        return []
    out = []
    for start in range(0, n - w + 1, s):
        out.append(SegmentWindow(start, {k: sig.samples[start : start + w].copy() for k, sig in signals.items()}))
    return out


def random_window_offsets(n_samples: int, window_samples: int, count: int, seed: int) -> list[int]:
    """Seed-controlled uniform draw of window start offsets over valid range."""
    if window_samples > n_samples:
        return []
    rng = np.random.default_rng(seed)
    return [int(o) for o in rng.integers(0, n_samples - window_samples + 1, size=count)]


def windows_at(signals: Mapping[str, SampledSignal], offsets, window_samples: int) -> list[SegmentWindow]:
    out = []
    for start in offsets:
        start = int(start)
        out.append(
            SegmentWindow(start, {k: sig.samples[start : start + window_samples].copy() for k, sig in signals.items()})
        )
    return out


def minmax_normalize(window: np.ndarray) -> np.ndarray:
    """Affine map of a window onto [-1, 1]; a flat window maps to zeros.

    y = 2 (x - min) / (max - min) - 1. Scaling is per-window and exact at the
    extremes. Applying it twice is a no-op.
    """
    x = np.asarray(window, dtype=np.float64)
    lo = x.min()
    hi = x.max()
    if hi == lo:
        return np.zeros_like(x)
    return 2.0 * (x - lo) / (hi - lo) - 1.0


def pad_to_length(x: np.ndarray, n: int, max_fraction: float = 0.005) -> np.ndarray:
    """Edge-pad a slightly short window up to n samples.

    Rate conversion of a nominal 32 s recording can come up a few samples
    short (640 at 20 Hz -> 3196 at 100 Hz). Shortfalls up to max_fraction of n
    (at least 4 samples) are padded with the edge value; larger ones are a
    caller error.
    """
    x = np.asarray(x)
    if len(x) == n:
        return x
    if len(x) > n:
        return x[:n]
    deficit = n - len(x)
    if deficit > max(4, int(max_fraction * n)):
        raise ValueError(f"window of {len(x)} samples is too short to pad to {n}")
    return np.pad(x, (0, deficit), mode="edge")


@dataclass
class TriaxialWindow:
    """Synchronous x/y/z window from one triaxial sensor."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    rate: float

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.z = np.asarray(self.z, dtype=np.float64)
        if not (self.x.shape == self.y.shape == self.z.shape) or self.x.ndim != 1:
            raise ValueError("axes must be 1-D and equal length")
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    def stacked(self) -> np.ndarray:
        """(3, n) array, rows x, y, z."""
        return np.stack([self.x, self.y, self.z])

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]


@dataclass
class SegmentBundle:
    """Model-ready segment: three aligned channels plus optional reference.

    channels rows: 0 = normalized PPG, 1 = ACC respiratory component,
    2 = GYR respiratory component, all SEGMENT_SAMPLES long at PROCESS_RATE.
    rr_ref is NaN when no reference device was available.
    """

    subject: str
    segment_id: str
    channels: np.ndarray
    rr_ref: float = float("nan")

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float64)
        if self.channels.shape != (3, SEGMENT_SAMPLES):
            raise ValueError(f"channels must be (3, {SEGMENT_SAMPLES}), got {self.channels.shape}")
        if not np.isnan(self.rr_ref) and not (4.0 <= self.rr_ref <= 60.0):
            raise ValueError(f"rr_ref must be in [4, 60] brpm or NaN, got {self.rr_ref}")

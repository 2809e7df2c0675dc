"""Windowed FFT peak location and band-power utilities.

Peak frequency is refined by parabolic interpolation over log-magnitude of
the zero-padded, Hann-windowed spectrum. Confidence of a peak is the share
of total non-DC power concentrated inside the window main lobe around it,
close to 1 for a clean tone and collapsing toward zero on broadband noise.
"""

from __future__ import annotations

import numpy as np


def band_power_fraction(x: np.ndarray, rate: float, band: tuple[float, float]) -> float:
    """Fraction of non-DC spectral power lying inside [band[0], band[1]] Hz."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) < 4:
        raise ValueError("need a 1-D signal of at least 4 samples")
    spec = np.abs(np.fft.rfft(x - x.mean())) ** 2
    freqs = np.fft.rfftfreq(len(x), d=1.0 / rate)
    total = spec[1:].sum()
    if total <= 0.0:
        return 0.0
    sel = (freqs >= band[0]) & (freqs <= band[1])
    sel[0] = False
    return float(spec[sel].sum() / total)


def spectral_peak(
    x: np.ndarray,
    rate: float,
    band: tuple[float, float],
    pad_factor: int = 8,
) -> tuple[float, float]:
    """Locate the dominant in-band frequency; returns (freq_hz, confidence).

    The signal is mean-removed, Hann-windowed and zero-padded by pad_factor
    before the FFT, giving a grid fine enough for sub-bin refinement: the
    three bins around the in-band power maximum are fit with a parabola on
    log magnitude and the vertex taken as the peak. Confidence is main-lobe
    power over total non-DC power, clipped to [0, 1]: near 1 when the peak
    dominates the whole spectrum, near the lobe's bin share for broadband
    noise. A window with no in-band power returns (nan, 0.0).
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if x.ndim != 1 or n < 8:
        raise ValueError("need a 1-D signal of at least 8 samples")
    if not (0.0 <= band[0] < band[1] <= rate / 2):
        raise ValueError(f"band {band} outside (0, {rate / 2}]")
    if pad_factor < 1:
        raise ValueError("pad_factor must be >= 1")
    xw = (x - x.mean()) * np.hanning(n)
    n_fft = int(n * pad_factor)
    spec = np.abs(np.fft.rfft(xw, n=n_fft))
    power = spec**2
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / rate)
    sel = np.flatnonzero((freqs >= band[0]) & (freqs <= band[1]) & (freqs > 0))
    if sel.size == 0:
        raise ValueError(f"band {band} contains no FFT bins")
    band_power = power[sel].sum()
    if band_power <= 0.0:
        return float("nan"), 0.0
    k = sel[np.argmax(power[sel])]

    freq = freqs[k]
    if 0 < k < len(spec) - 1 and spec[k] > 0 and spec[k - 1] > 0 and spec[k + 1] > 0:
        # Ratios to the center bin keep the fit scale-invariant: the center
        # log is exactly 0 and the neighbor logs are small and well
        # conditioned.
        la = np.log(spec[k - 1] / spec[k])
        lc = np.log(spec[k + 1] / spec[k])
        denom = la + lc
        if denom < 0:
            shift = 0.5 * (la - lc) / denom
            if abs(shift) <= 1.0:
                freq = freqs[k] + shift * (rate / n_fft)

    # Hann main lobe spans +-2 unpadded bins = +-2 * pad_factor padded bins.
    half = 2 * pad_factor
    lobe = power[max(k - half, 1) : min(k + half + 1, len(power))]
    confidence = float(np.clip(lobe.sum() / power[1:].sum(), 0.0, 1.0))
    return float(freq), confidence

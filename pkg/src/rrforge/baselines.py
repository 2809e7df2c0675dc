"""Classical comparator: PPG modulation spectra + ACC principal-axis RR.

The PPG side measures the respiration-induced amplitude (AM), baseline (BW),
and beat-interval (FM) series at detected beats, resamples each to a uniform
4 Hz waveform, and takes the median of their spectral-peak RRs. The ACC side
projects the three axes onto the first principal axis and reads the spectral
peak of the projection. Sides are fused by confidence-weighted mean and the
window is unavailable when both confidences sit below the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import detrend

from .groundtruth import RESP_BAND, rr_fft_axis
from .quality import detect_cardiac_cycles
from .signals import TriaxialWindow
from .spectrum import spectral_peak

MODULATION_RATE = 4.0
MIN_BEATS = 10
CONF_THRESHOLD = 0.3


@dataclass
class ModulationSet:
    """Detrended uniform-rate surrogate respiratory waveforms.

    am/bw/fm are aligned and equal length at `rate` Hz. The *_level fields
    keep the pre-detrend means of the beat series (the waveforms themselves
    are zero-mean by construction).
    """

    am: np.ndarray
    bw: np.ndarray
    fm: np.ndarray
    rate: float
    am_level: float
    bw_level: float
    fm_level: float


@dataclass
class BaselineEstimate:
    rr: float | None
    quality: float

    @property
    def available(self) -> bool:
        return self.rr is not None


def extract_modulations(ppg: np.ndarray, rate: float) -> ModulationSet | None:
    """Beat-indexed AM/BW/FM series, resampled to uniform 4 Hz and detrended.

    Per beat: AM = peak - following trough, BW = their mean, FM = interval to
    the next beat. Returns None when fewer than MIN_BEATS beats are found.
    """
    ppg = np.asarray(ppg, dtype=np.float64)
    peaks = detect_cardiac_cycles(ppg, rate)
    if len(peaks) < MIN_BEATS:
        return None
    am, bw, fm, t = [], [], [], []
    for a, b in zip(peaks[:-1], peaks[1:]):
        trough = float(ppg[a:b].min())
        peak_val = float(ppg[a])
        am.append(peak_val - trough)
        bw.append((peak_val + trough) / 2.0)
        fm.append((b - a) / rate)
        t.append(a / rate)
    t = np.asarray(t)
    grid = np.arange(t[0], t[-1], 1.0 / MODULATION_RATE)
    series = {}
    levels = {}
    for name, vals in (("am", am), ("bw", bw), ("fm", fm)):
        vals = np.asarray(vals, dtype=np.float64)
        levels[name] = float(vals.mean())
        series[name] = detrend(np.interp(grid, t, vals))
    return ModulationSet(
        am=series["am"],
        bw=series["bw"],
        fm=series["fm"],
        rate=MODULATION_RATE,
        am_level=levels["am"],
        bw_level=levels["bw"],
        fm_level=levels["fm"],
    )


def first_principal_axis(window: TriaxialWindow) -> np.ndarray:
    """Project the axes onto the top eigenvector of the channel covariance.

    Sign is fixed so the sample of maximal magnitude is positive. The top
    eigenpair stays well defined for rank-deficient covariances (identical
    channels must project to sqrt(3) x the shared signal, not to one raw
    axis), so the raw-axis fallback fires only when there is no usable top
    eigenvalue at all.
    """
    X = window.stacked()
    X = X - X.mean(axis=1, keepdims=True)
    cov = (X @ X.T) / X.shape[1]
    evals, evecs = np.linalg.eigh(cov)
    if evals[-1] <= 0 or not np.all(np.isfinite(evecs)):
        proj = X[int(np.argmax(np.diag(cov)))]
    else:
        proj = evecs[:, -1] @ X
    if proj[np.argmax(np.abs(proj))] < 0:
        proj = -proj
    return proj


def baseline_rr(ppg_window: np.ndarray, acc_window: TriaxialWindow, rate: float) -> BaselineEstimate:
    """Fused classical RR for one window; rr None when both sides are weak."""
    ppg_rr = None
    ppg_conf = 0.0
    mods = extract_modulations(ppg_window, rate)
    if mods is not None:
        rrs, confs = [], []
        for wave in (mods.am, mods.bw, mods.fm):
            freq, conf = spectral_peak(wave, mods.rate, RESP_BAND)
            if np.isfinite(freq):
                rrs.append(60.0 * freq)
                confs.append(conf)
        if rrs:
            ppg_rr = float(np.median(rrs))
            ppg_conf = float(np.mean(confs))

    acc_est = rr_fft_axis(first_principal_axis(acc_window), acc_window.rate)
    acc_rr, acc_conf = acc_est.rr, (0.0 if acc_est.flagged else acc_est.confidence)

    if ppg_conf < CONF_THRESHOLD and acc_conf < CONF_THRESHOLD:
        return BaselineEstimate(rr=None, quality=max(ppg_conf, acc_conf))
    num, den = 0.0, 0.0
    for val, conf in ((ppg_rr, ppg_conf), (acc_rr, acc_conf)):
        if val is not None and conf > 0:
            num += conf * val
            den += conf
    return BaselineEstimate(rr=float(num / den), quality=float(max(ppg_conf, acc_conf)))

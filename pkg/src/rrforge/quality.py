"""PPG window quality gate.

Five features per normalized window (cardiac-band power fraction, IQR, mean
cycle energy, template correlation, template distance) scored by a one-class
SVM with RBF kernel. The dual is solved by a two-coordinate ascent (SMO) on

    min 1/2 a^T K a   s.t.  0 <= a_i <= 1/(nu n),  sum a_i = 1

and a window is accepted iff sum_i a_i k(x_i, x) - rho >= 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks, welch

CARDIAC_BAND = (0.6, 3.0)
CYCLE_POINTS = 100
REFRACTORY_S = 0.33
THRESHOLD_WINDOW_S = 2.0
# Worst-case stand-ins when no cycle structure is detectable.
FALLBACK_ENERGY = 0.0
FALLBACK_CORR = -1.0
FALLBACK_DIST = 100.0

N_FEATURES = 5


@dataclass
class QualityFeatures:
    psd_ratio: float
    iqr: float
    cycle_energy: float
    template_corr: float
    template_dist: float
    fallback: bool = False

    def as_vector(self) -> np.ndarray:
        return np.array(
            [self.psd_ratio, self.iqr, self.cycle_energy, self.template_corr, self.template_dist],
            dtype=np.float64,
        )


def detect_cardiac_cycles(ppg: np.ndarray, rate: float) -> np.ndarray:
    """Local maxima above an adaptive threshold, with a 0.33 s refractory.

    Threshold = rolling mean + 0.5 * rolling std over a 2 s window, so slow
    baseline wander does not mask beats. Returns strictly increasing indices.
    """
    ppg = np.asarray(ppg, dtype=np.float64)
    if rate < 20:
        raise ValueError(f"rate must be >= 20 Hz, got {rate}")
    if len(ppg) / rate < 5:
        raise ValueError("window must span at least 5 s")
    w = max(3, int(round(THRESHOLD_WINDOW_S * rate)))
    rmean = uniform_filter1d(ppg, w, mode="nearest")
    rsq = uniform_filter1d(ppg**2, w, mode="nearest")
    rstd = np.sqrt(np.maximum(rsq - rmean**2, 0.0))
    threshold = rmean + 0.5 * rstd
    distance = max(1, int(round(REFRACTORY_S * rate)))
    peaks, _ = find_peaks(ppg, height=threshold, distance=distance)
    return peaks


def _resample_cycle(cycle: np.ndarray, n_points: int = CYCLE_POINTS) -> np.ndarray:
    idx = np.linspace(0.0, len(cycle) - 1.0, n_points)
    return np.interp(idx, np.arange(len(cycle)), cycle)


def extract_quality_features(ppg: np.ndarray, rate: float) -> QualityFeatures:
    """Compute the five gate features from one normalized PPG window."""
    ppg = np.asarray(ppg, dtype=np.float64)
    nperseg = min(512, len(ppg))
    freqs, psd = welch(ppg, fs=rate, nperseg=nperseg, detrend="constant")
    total = psd.sum()
    if total > 0:
        sel = (freqs >= CARDIAC_BAND[0]) & (freqs <= CARDIAC_BAND[1])
        psd_ratio = float(np.clip(psd[sel].sum() / total, 0.0, 1.0))
    else:
        psd_ratio = 0.0
    q75, q25 = np.percentile(ppg, [75, 25])
    iqr = float(q75 - q25)

    peaks = detect_cardiac_cycles(ppg, rate)
    if len(peaks) < 3:
        return QualityFeatures(psd_ratio, iqr, FALLBACK_ENERGY, FALLBACK_CORR, FALLBACK_DIST, fallback=True)

    cycles = []
    energies = []
    for a, b in zip(peaks[:-1], peaks[1:]):
        cyc = ppg[a:b]
        energies.append(float(np.sum(cyc**2)))
        cycles.append(_resample_cycle(cyc))
    cycles = np.asarray(cycles)
    template = cycles.mean(axis=0)

    t_center = template - template.mean()
    t_norm = np.linalg.norm(t_center)
    corrs = []
    for cyc in cycles:
        c_center = cyc - cyc.mean()
        c_norm = np.linalg.norm(c_center)
        if t_norm < 1e-12 or c_norm < 1e-12:
            corrs.append(0.0)
        else:
            corrs.append(float(np.dot(c_center, t_center) / (c_norm * t_norm)))
    dists = np.linalg.norm(cycles - template, axis=1)

    return QualityFeatures(
        psd_ratio=psd_ratio,
        iqr=iqr,
        cycle_energy=float(np.mean(energies)),
        template_corr=float(np.clip(np.mean(corrs), -1.0, 1.0)),
        template_dist=float(np.mean(dists)),
    )


@dataclass
class QualityModel:
    nu: float
    gamma: float
    rho: float
    mean: np.ndarray          # (5,) feature standardization offsets
    scale: np.ndarray         # (5,) feature standardization scales
    support_vectors: np.ndarray   # (m, 5), standardized
    coefficients: np.ndarray      # (m,), in [0, 1/(nu n)], sum 1
    kkt_gap: float = 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "nu": self.nu,
                "gamma": self.gamma,
                "rho": self.rho,
                "mean": self.mean.tolist(),
                "scale": self.scale.tolist(),
                "support_vectors": self.support_vectors.tolist(),
                "coefficients": self.coefficients.tolist(),
                "kkt_gap": self.kkt_gap,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "QualityModel":
        d = json.loads(text)
        return cls(
            nu=float(d["nu"]),
            gamma=float(d["gamma"]),
            rho=float(d["rho"]),
            mean=np.asarray(d["mean"], dtype=np.float64),
            scale=np.asarray(d["scale"], dtype=np.float64),
            support_vectors=np.asarray(d["support_vectors"], dtype=np.float64).reshape(-1, N_FEATURES),
            coefficients=np.asarray(d["coefficients"], dtype=np.float64),
            kkt_gap=float(d.get("kkt_gap", 0.0)),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "QualityModel":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _as_matrix(features) -> np.ndarray:
    rows = [f.as_vector() if isinstance(f, QualityFeatures) else np.asarray(f, dtype=np.float64) for f in features]
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise ValueError(f"expected (n, {N_FEATURES}) features, got {X.shape}")
    return X


def train_quality_model(
    features,
    nu: float = 0.05,
    gamma: float = 0.2,
    tol: float = 1e-4,
    max_iter: int | None = None,
) -> QualityModel:
    """Fit the one-class boundary on presumed-clean windows.

    Features are standardized with training statistics; the dual is solved by
    repeatedly picking the most-violating pair (max gradient gap) and moving
    mass between the two coordinates, preserving sum(alpha) = 1 and the box.
    """
    if not (0.0 < nu <= 1.0):
        raise ValueError(f"nu must be in (0, 1], got {nu}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    X = _as_matrix(features)
    n = X.shape[0]
    if n < 50:
        raise ValueError(f"need at least 50 training windows, got {n}")
    std = X.std(axis=0)
    if np.all(std < 1e-12):
        raise ValueError("invalid training set: all feature rows identical")
    mean = X.mean(axis=0)
    scale = np.where(std < 1e-12, 1.0, std)
    Xs = (X - mean) / scale

    K = _rbf_kernel(Xs, Xs, gamma)
    upper = 1.0 / (nu * n)
    alpha = np.full(n, 1.0 / n)
    grad = K @ alpha  # gradient of 1/2 a^T K a
    if max_iter is None:
        max_iter = max(10_000, 400 * n)

    gap = np.inf
    for _ in range(max_iter):
        can_up = alpha < upper - 1e-14
        can_down = alpha > 1e-14
        gi = np.where(can_up, grad, np.inf).argmin()
        gj = np.where(can_down, grad, -np.inf).argmax()
        gap = grad[gj] - grad[gi]
        if gap < tol:
            break
        eta = K[gi, gi] + K[gj, gj] - 2.0 * K[gi, gj]
        step = gap / max(eta, 1e-12)
        step = min(step, upper - alpha[gi], alpha[gj])
        alpha[gi] += step
        alpha[gj] -= step
        grad += step * (K[:, gi] - K[:, gj])

    alpha = np.clip(alpha, 0.0, upper)
    alpha /= alpha.sum()

    free = (alpha > 1e-8 * upper) & (alpha < upper * (1.0 - 1e-8))
    if np.any(free):
        rho = float(grad[free].mean())
    else:
        # KKT sandwich: rho >= grad at upper-bound points, <= grad at zeros.
        at_upper = alpha >= upper * (1.0 - 1e-8)
        at_zero = alpha <= 1e-8 * upper
        lo = grad[at_upper].max() if at_upper.any() else grad.min()
        hi = grad[at_zero].min() if at_zero.any() else grad.max()
        rho = float((lo + hi) / 2.0)

    keep = alpha > 1e-12
    return QualityModel(
        nu=nu,
        gamma=gamma,
        rho=rho,
        mean=mean,
        scale=scale,
        support_vectors=Xs[keep],
        coefficients=alpha[keep],
        kkt_gap=float(gap),
    )


def quality_score(features, model: QualityModel) -> float:
    """Decision value sum_i a_i k(x_i, x) - rho; >= 0 means accept."""
    x = features.as_vector() if isinstance(features, QualityFeatures) else np.asarray(features, dtype=np.float64)
    xs = (x - model.mean) / model.scale
    k = _rbf_kernel(model.support_vectors, xs[None, :], model.gamma)[:, 0]
    return float(model.coefficients @ k - model.rho)


def assess(features, model: QualityModel) -> tuple[bool, float]:
    """Accept/reject one window; returns (accept, score)."""
    score = quality_score(features, model)
    return score >= 0.0, score

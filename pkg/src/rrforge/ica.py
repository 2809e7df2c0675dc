"""Respiration extraction from triaxial IMU windows via whitening + FastICA.

The three axes are centered, whitened by eigendecomposition of the channel
covariance, and rotated by FastICA with tanh contrast and symmetric
decorrelation. The respiratory component is the one with the largest power
fraction in the 0.1-0.5 Hz band.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .signals import TriaxialWindow, minmax_normalize
from .spectrum import band_power_fraction

RESP_BAND = (0.1, 0.5)
# Covariance condition number past which trailing eigenpairs are dropped.
COND_LIMIT = 1e8
# Below this band-power fraction on every component the selection is dubious.
LOW_CONFIDENCE_FRACTION = 0.05


@dataclass
class IcaResult:
    unmixing: np.ndarray            # (rank, rank) rotation in whitened space, unit-norm rows
    components: np.ndarray          # (rank, n) zero-mean, unit-variance
    band_power_fractions: np.ndarray  # (rank,) share of power in RESP_BAND
    selected_index: int
    rate: float
    converged: bool
    rank: int

    @property
    def low_confidence(self) -> bool:
        return bool(np.all(self.band_power_fractions < LOW_CONFIDENCE_FRACTION))


def _sym_decorrelate(W: np.ndarray) -> np.ndarray:
    """W <- (W W^T)^(-1/2) W, the symmetric orthogonalization."""
    s, u = np.linalg.eigh(W @ W.T)
    s = np.maximum(s, 1e-12)
    return (u / np.sqrt(s)) @ u.T @ W


def fastica(
    window: TriaxialWindow,
    max_iter: int = 200,
    tol: float = 1e-6,
    seed: int = 0,
) -> IcaResult:
    """Separate one triaxial window into independent components.

    Deterministic for a given seed. A covariance with condition number
    >= COND_LIMIT is reduced to its numerically significant rank with a
    warning. If the rotation has not settled (max row-direction change >= tol)
    after max_iter sweeps, the best iterate is returned with converged=False.
    """
    X = window.stacked()
    n = X.shape[1]
    if n < 16:
        raise ValueError("window too short for source separation")
    X = X - X.mean(axis=1, keepdims=True)
    cov = (X @ X.T) / n

    evals, evecs = np.linalg.eigh(cov)  # ascending
    top = evals[-1]
    if top <= 0:
        raise ValueError("all channels are constant; nothing to separate")
    keep = evals > top / COND_LIMIT
    rank = int(keep.sum())
    if rank < 3:
        warnings.warn(f"channel covariance is rank-deficient; reducing to rank {rank}", stacklevel=2)
    d = evals[keep]
    E = evecs[:, keep]
    Z = (E / np.sqrt(d)).T @ X  # (rank, n), identity covariance

    rng = np.random.default_rng(seed)
    W = _sym_decorrelate(rng.standard_normal((rank, rank)))
    converged = False
    for _ in range(max_iter):
        WZ = W @ Z
        g = np.tanh(WZ)
        g_prime_mean = 1.0 - (g**2).mean(axis=1)
        W_new = _sym_decorrelate((g @ Z.T) / n - g_prime_mean[:, None] * W)
        drift = np.max(1.0 - np.abs(np.sum(W_new * W, axis=1)))
        W = W_new
        if drift < tol:
            converged = True
            break

    components = W @ Z
    fractions = np.array([band_power_fraction(c, window.rate, RESP_BAND) for c in components])
    return IcaResult(
        unmixing=W,
        components=components,
        band_power_fractions=fractions,
        selected_index=int(np.argmax(fractions)),
        rate=window.rate,
        converged=converged,
        rank=rank,
    )


def select_respiratory_component(result: IcaResult) -> np.ndarray:
    """Return the max respiratory-band-power component, scaled to [-1, 1].

    Ties in band power resolve to the lower index (argmax convention). When
    result.low_confidence is set the component is still returned; downstream
    consumers decide what to do with dubious windows.
    """
    return minmax_normalize(result.components[result.selected_index])


def extract_respiratory(window: TriaxialWindow, seed: int = 0) -> np.ndarray:
    """One-call path: fastica + selection + normalization."""
    return select_respiratory_component(fastica(window, seed=seed))

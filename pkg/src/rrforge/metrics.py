"""Agreement metrics between estimated and reference RR."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


def _paired(est, ref) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(est, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    if e.ndim != 1 or r.ndim != 1 or e.shape != r.shape:
        raise ValueError(f"est/ref must be equal-length 1-D, got {e.shape} vs {r.shape}")
    if e.size == 0:
        raise ValueError("empty input")
    return e, r


def mae(est, ref) -> float:
    e, r = _paired(est, ref)
    return float(np.mean(np.abs(e - r)))


def rmse(est, ref) -> float:
    e, r = _paired(est, ref)
    return float(np.sqrt(np.mean((e - r) ** 2)))


def bland_altman(est, ref) -> tuple[float, float, float]:
    """(mean bias, lower/upper limits of agreement).

    Differences are est - ref, so positive bias means overestimation; limits
    are bias +- 1.96 * sample (N-1) standard deviation.
    """
    e, r = _paired(est, ref)
    if e.size < 2:
        raise ValueError("Bland-Altman needs at least 2 pairs")
    d = e - r
    bias = float(d.mean())
    sd = float(d.std(ddof=1))
    return bias, bias - 1.96 * sd, bias + 1.96 * sd


def abs_error_quartiles(est, ref) -> tuple[float, float, float]:
    """Quartiles of |est - ref| by linear interpolation between order stats."""
    e, r = _paired(est, ref)
    q1, q2, q3 = np.percentile(np.abs(e - r), [25, 50, 75])
    return float(q1), float(q2), float(q3)


@dataclass
class EvalReport:
    mae: float
    rmse: float
    mean_bias: float
    loa_low: float
    loa_high: float
    abs_err_q1: float
    abs_err_median: float
    abs_err_q3: float
    n: int
    method: str
    param_count: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_pairs(est, ref, method: str, param_count: int | None = None) -> EvalReport:
    """Full report over paired estimates/references."""
    e, r = _paired(est, ref)
    bias, lo, hi = bland_altman(e, r)
    q1, q2, q3 = abs_error_quartiles(e, r)
    return EvalReport(
        mae=mae(e, r),
        rmse=rmse(e, r),
        mean_bias=bias,
        loa_low=lo,
        loa_high=hi,
        abs_err_q1=q1,
        abs_err_median=q2,
        abs_err_q3=q3,
        n=int(e.size),
        method=method,
        param_count=param_count,
    )

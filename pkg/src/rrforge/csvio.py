"""CSV ingestion and emission for raw recordings.

Wrist files carry columns t,ppg,acc_x,acc_y,acc_z,gyr_x,gyr_y,gyr_z; chest
files carry t,acc_x,acc_y,acc_z. Time stamps must be strictly increasing and
uniformly spaced; the sampling rate is recovered from the stamps.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .signals import SampledSignal

WRIST_COLUMNS = ["t", "ppg", "acc_x", "acc_y", "acc_z", "gyr_x", "gyr_y", "gyr_z"]
CHEST_COLUMNS = ["t", "acc_x", "acc_y", "acc_z"]


def _read_frame(path, columns: list[str]) -> pd.DataFrame:
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ValueError(f"cannot read CSV {path}: {exc}") from exc
    if list(df.columns) != columns:
        raise ValueError(f"{path}: expected columns {columns}, got {list(df.columns)}")
    if len(df) < 2:
        raise ValueError(f"{path}: need at least 2 rows")
    vals = df.to_numpy(dtype=np.float64, na_value=np.nan)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{path}: non-finite or missing values")
    return df


def _rate_from_times(t: np.ndarray, path) -> float:
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError(f"{path}: time stamps must be strictly increasing")
    mean_dt = (t[-1] - t[0]) / (len(t) - 1)
    if np.max(np.abs(dt - mean_dt)) > 0.01 * mean_dt:
        raise ValueError(f"{path}: time stamps are not uniformly spaced")
    # Snap to a clean rate; stamps are typically rounded in the file.
    return round(1.0 / mean_dt, 3)


def read_wrist_csv(path) -> dict[str, SampledSignal]:
    """Load a wrist recording; returns channel name -> SampledSignal."""
    df = _read_frame(path, WRIST_COLUMNS)
    t = df["t"].to_numpy(dtype=np.float64)
    rate = _rate_from_times(t, path)
    return {
        c: SampledSignal(df[c].to_numpy(dtype=np.float64), rate, start_time=float(t[0]))
        for c in WRIST_COLUMNS[1:]
    }


def read_chest_csv(path) -> dict[str, SampledSignal]:
    """Load a chest accelerometer recording; returns axis name -> SampledSignal."""
    df = _read_frame(path, CHEST_COLUMNS)
    t = df["t"].to_numpy(dtype=np.float64)
    rate = _rate_from_times(t, path)
    return {
        c: SampledSignal(df[c].to_numpy(dtype=np.float64), rate, start_time=float(t[0]))
        for c in CHEST_COLUMNS[1:]
    }


def write_channels_csv(path, t: np.ndarray, channels: dict[str, np.ndarray], decimals: int = 5) -> None:
    """Write t plus named channels as CSV, values rounded to `decimals`."""
    data = {"t": np.round(t, 6)}
    for name, vals in channels.items():
        data[name] = np.round(np.asarray(vals, dtype=np.float64), decimals)
    pd.DataFrame(data).to_csv(path, index=False)

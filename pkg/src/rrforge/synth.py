"""Seeded synthetic wrist + chest generator with known respiratory rate.

Every segment is produced from a SynthSpec by one RNG stream, so identical
specs give bitwise-identical signals. Wrist channels come out at 20 Hz and
chest at 512 Hz to force both resampling directions downstream.

PPG model: a two-Gaussian pulse fired at beat times whose instantaneous rate
is hr * (1 + fm_depth * sin(2 pi f_r t)); pulse amplitude carries the AM term,
an additive baseline tone carries BW, plus white noise. Wrist ACC/GYR mix a
respiration tone with broadband noise sources per axis; corrupted segments
add 3-8 Hz chirp bursts to PPG and IMU. Chest ACC carries the tone dominantly
on one random axis.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .csvio import write_channels_csv

WRIST_RATE = 20.0
CHEST_RATE = 512.0
SEGMENT_S = 32.0

# Pulse template: systolic lobe + smaller diastolic lobe (seconds, relative
# to the beat reference time).
_SYS_T, _SYS_W = 0.13, 0.045
_DIA_T, _DIA_W = 0.38, 0.11
_DIA_AMP = 0.5

# IMU mixing levels relative to SynthSpec.noise_std.
IMU_NOISE_GAIN = 3.0
IMU_SENSOR_NOISE = 0.5
CHEST_NOISE_GAIN = 0.3
CHEST_WEAK_LOADING = (0.05, 0.2)


@dataclass
class SynthSpec:
    rr: float
    hr: float = 72.0
    am_depth: float = 0.2
    bw_depth: float = 0.15
    fm_depth: float = 0.08
    noise_std: float = 0.05
    motion_burst_prob: float = 0.0
    imu_resp_gain: float = 1.0
    seed: int = 0

    def validate(self) -> "SynthSpec":
        checks = [
            (6.0 <= self.rr <= 30.0, f"rr must be in [6, 30] brpm, got {self.rr}"),
            (40.0 <= self.hr <= 180.0, f"hr must be in [40, 180] bpm, got {self.hr}"),
            (0.0 <= self.am_depth <= 0.5, f"am_depth must be in [0, 0.5], got {self.am_depth}"),
            (0.0 <= self.bw_depth <= 0.5, f"bw_depth must be in [0, 0.5], got {self.bw_depth}"),
            (0.0 <= self.fm_depth <= 0.5, f"fm_depth must be in [0, 0.5], got {self.fm_depth}"),
            (self.noise_std >= 0.0, f"noise_std must be >= 0, got {self.noise_std}"),
            (0.0 <= self.motion_burst_prob <= 1.0, f"motion_burst_prob must be in [0, 1], got {self.motion_burst_prob}"),
            (self.imu_resp_gain >= 0.0, f"imu_resp_gain must be >= 0, got {self.imu_resp_gain}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)
        return self


@dataclass
class SegmentData:
    wrist: dict[str, np.ndarray]   # ppg, acc_x..z, gyr_x..z at WRIST_RATE
    chest: dict[str, np.ndarray]   # acc_x..z at CHEST_RATE
    rr_truth: float
    beat_times: np.ndarray         # systolic peak times in seconds
    corrupted: bool = False


def _pulse(tau: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * ((tau - _SYS_T) / _SYS_W) ** 2) + _DIA_AMP * np.exp(-0.5 * ((tau - _DIA_T) / _DIA_W) ** 2)


def _beat_times(hr: float, f_r: float, fm_depth: float, t_end: float) -> np.ndarray:
    """Invert the cumulative beat phase on a dense grid.

    Phase(t) = (hr/60) * (t - fm/(2 pi f_r) * (cos(2 pi f_r t) - 1)) increases
    monotonically (fm <= 0.5), so beat k fires at Phase == k.
    """
    grid = np.arange(-3.0, t_end + 3.0, 0.005)
    omega = 2.0 * math.pi * f_r
    phase = (hr / 60.0) * (grid - (fm_depth / omega) * (np.cos(omega * grid) - 1.0))
    ks = np.arange(math.ceil(phase[0]), math.floor(phase[-1]) + 1)
    return np.interp(ks, phase, grid)


def _chirp_burst(t: np.ndarray, rng: np.random.Generator, span_s: float) -> np.ndarray:
    """One Hann-enveloped frequency sweep in the 3-8 Hz motion band."""
    t0 = rng.uniform(0.0, max(span_s - 5.0, 0.1))
    dur = rng.uniform(2.0, 5.0)
    f0, f1 = rng.uniform(3.0, 8.0, 2)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    local = t - t0
    inside = (local >= 0) & (local <= dur)
    envelope = np.zeros_like(t)
    envelope[inside] = 0.5 * (1.0 - np.cos(2.0 * math.pi * local[inside] / dur))
    sweep = 2.0 * math.pi * (f0 * local + (f1 - f0) / (2.0 * dur) * local**2)
    return envelope * np.sin(sweep + phi)


def gen_segment(spec: SynthSpec) -> SegmentData:
    """Generate one 32 s wrist + chest segment from a validated spec."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    f_r = spec.rr / 60.0
    omega = 2.0 * math.pi * f_r

    t_w = np.arange(int(SEGMENT_S * WRIST_RATE)) / WRIST_RATE
    t_c = np.arange(int(SEGMENT_S * CHEST_RATE)) / CHEST_RATE

    beats = _beat_times(spec.hr, f_r, spec.fm_depth, SEGMENT_S)
    amps = 1.0 + spec.am_depth * np.sin(omega * beats)
    # (n_samples, n_beats) pulse bank; support is ~1 s so the matrix is cheap.
    ppg = (_pulse(t_w[:, None] - beats[None, :]) * amps[None, :]).sum(axis=1)
    ppg += spec.bw_depth * np.sin(omega * t_w)
    ppg += rng.normal(0.0, spec.noise_std, t_w.shape)

    def imu_triplet() -> list[np.ndarray]:
        phase = rng.uniform(0.0, 2.0 * math.pi)
        tone = np.sin(omega * t_w + phase)
        loadings = spec.imu_resp_gain * rng.uniform(0.4, 1.0, 3) * rng.choice([-1.0, 1.0], 3)
        noise_src = rng.normal(0.0, 1.0, (2, t_w.size))
        noise_mix = rng.normal(0.0, IMU_NOISE_GAIN * spec.noise_std, (3, 2))
        axes = []
        for a in range(3):
            axis = loadings[a] * tone + noise_mix[a] @ noise_src
            axis += rng.normal(0.0, IMU_SENSOR_NOISE * spec.noise_std, t_w.shape)
            axes.append(axis)
        return axes

    acc = imu_triplet()
    gyr = imu_triplet()

    corrupted = bool(rng.random() < spec.motion_burst_prob)
    if corrupted:
        for _ in range(int(rng.integers(1, 4))):
            burst = _chirp_burst(t_w, rng, SEGMENT_S)
            ppg += rng.uniform(2.0, 4.0) * burst
            for axes in (acc, gyr):
                for a in range(3):
                    axes[a] += rng.uniform(1.0, 3.0) * burst

    phase_c = rng.uniform(0.0, 2.0 * math.pi)
    tone_c = np.sin(omega * t_c + phase_c)
    dom = int(rng.integers(0, 3))
    chest = []
    offsets = rng.uniform(-1.0, 1.0, 3)
    chest_noise = CHEST_NOISE_GAIN * spec.noise_std + 0.01
    for a in range(3):
        loading = 1.0 if a == dom else rng.uniform(*CHEST_WEAK_LOADING)
        chest.append(offsets[a] + loading * tone_c + rng.normal(0.0, chest_noise, t_c.shape))

    # Systolic peak of the template sits _SYS_T after the beat reference.
    peak_times = beats + _SYS_T
    keep = (peak_times >= 0.0) & (peak_times < SEGMENT_S)
    return SegmentData(
        wrist={
            "ppg": ppg,
            "acc_x": acc[0], "acc_y": acc[1], "acc_z": acc[2],
            "gyr_x": gyr[0], "gyr_y": gyr[1], "gyr_z": gyr[2],
        },
        chest={"acc_x": chest[0], "acc_y": chest[1], "acc_z": chest[2]},
        rr_truth=spec.rr,
        beat_times=peak_times[keep],
        corrupted=corrupted,
    )


@dataclass
class CorpusSpec:
    n_subjects: int = 4
    segments_per_subject: int = 8
    rr_range: tuple[float, float] = (8.0, 25.0)
    corruption_fraction: float = 0.0
    noise_std: float = 0.05
    imu_resp_gain: float = 1.0
    hr_range: tuple[float, float] = (55.0, 90.0)
    depth_scale: float = 1.0
    seed: int = 0

    def validate(self) -> "CorpusSpec":
        if self.n_subjects < 2:
            raise ValueError(f"n_subjects must be >= 2 for subject-disjoint splits, got {self.n_subjects}")
        if self.segments_per_subject < 1:
            raise ValueError("segments_per_subject must be >= 1")
        lo, hi = self.rr_range
        if not (6.0 <= lo < hi <= 30.0):
            raise ValueError(f"rr_range must satisfy 6 <= lo < hi <= 30, got {self.rr_range}")
        lo, hi = self.hr_range
        if not (40.0 <= lo < hi <= 180.0):
            raise ValueError(f"hr_range must satisfy 40 <= lo < hi <= 180, got {self.hr_range}")
        if not (0.0 <= self.corruption_fraction <= 1.0):
            raise ValueError(f"corruption_fraction must be in [0, 1], got {self.corruption_fraction}")
        if self.noise_std < 0 or self.imu_resp_gain < 0 or self.depth_scale < 0:
            raise ValueError("noise_std, imu_resp_gain, depth_scale must be >= 0")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown corpus spec fields: {sorted(unknown)}")
        kwargs = dict(d)
        for key in ("rr_range", "hr_range"):
            if key in kwargs:
                val = kwargs[key]
                if not (isinstance(val, (list, tuple)) and len(val) == 2):
                    raise ValueError(f"{key} must be a [lo, hi] pair")
                kwargs[key] = (float(val[0]), float(val[1]))
        return cls(**kwargs).validate()


def segment_spec(corpus: CorpusSpec, rng: np.random.Generator, hr: float, corrupted: bool) -> SynthSpec:
    """Draw one segment's generation parameters from corpus-level knobs."""
    ds = corpus.depth_scale
    return SynthSpec(
        rr=float(rng.uniform(*corpus.rr_range)),
        hr=float(np.clip(hr + rng.normal(0.0, 2.0), 40.0, 180.0)),
        am_depth=float(np.clip(ds * rng.uniform(0.12, 0.3), 0.0, 0.5)),
        bw_depth=float(np.clip(ds * rng.uniform(0.08, 0.22), 0.0, 0.5)),
        fm_depth=float(np.clip(ds * rng.uniform(0.04, 0.12), 0.0, 0.5)),
        noise_std=corpus.noise_std,
        motion_burst_prob=1.0 if corrupted else 0.0,
        imu_resp_gain=corpus.imu_resp_gain,
        seed=int(rng.integers(0, 2**31 - 1)),
    )


def gen_corpus(out_dir, corpus: CorpusSpec) -> dict:
    """Write corpus/<subject>/<segment>.{wrist,chest}.csv plus manifest.json.

    The manifest records, per segment, the subject, ids, injected rr_truth,
    the corruption flag, and the full per-segment spec; it is a pure function
    of (corpus spec, seed).
    """
    corpus.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(corpus.seed)
    # Stratified corruption: exactly round(fraction * n) segments, seeded
    # placement, so corpus-level rates match the knob instead of a binomial
    # draw around it.
    n_total = corpus.n_subjects * corpus.segments_per_subject
    corrupt_mask = np.zeros(n_total, dtype=bool)
    corrupt_mask[: round(corpus.corruption_fraction * n_total)] = True
    rng.shuffle(corrupt_mask)
    rows = []
    t_w = np.arange(int(SEGMENT_S * WRIST_RATE)) / WRIST_RATE
    t_c = np.arange(int(SEGMENT_S * CHEST_RATE)) / CHEST_RATE
    for si in range(corpus.n_subjects):
        subject = f"s{si:02d}"
        sub_dir = out_dir / subject
        sub_dir.mkdir(exist_ok=True)
        hr = float(rng.uniform(*corpus.hr_range))
        for gi in range(corpus.segments_per_subject):
            seg_id = f"seg{gi:04d}"
            corrupted = bool(corrupt_mask[si * corpus.segments_per_subject + gi])
            spec = segment_spec(corpus, rng, hr, corrupted)
            data = gen_segment(spec)
            write_channels_csv(sub_dir / f"{seg_id}.wrist.csv", t_w, data.wrist)
            write_channels_csv(sub_dir / f"{seg_id}.chest.csv", t_c, data.chest)
            rows.append(
                {
                    "subject": subject,
                    "segment": seg_id,
                    "rr_truth": data.rr_truth,
                    "corrupted": data.corrupted,
                    "spec": asdict(spec),
                }
            )
    manifest = {"corpus_spec": asdict(corpus), "seed": corpus.seed, "segments": rows}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest

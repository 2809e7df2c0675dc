"""Corpus preparation: raw CSV recordings -> model-ready segment store.

Flow per corpus:
  1. every wrist recording is resampled to 100 Hz and cut into 32 s windows;
     the five quality features are computed from each normalized PPG window
  2. a one-class quality model (loaded, or trained on the corpus' clean
     windows) accepts or rejects each window
  3. accepted windows get their ACC and GYR respiratory components via ICA,
     the PPG is normalized, and the matching chest window (when present) is
     labeled by the Kalman-fused FFT reference extractor
  4. bundles land in segments.bin; rejections in rejected.csv; run stats in
     stats.json; the quality model in quality_model.json

Windows of one recording are labeled chronologically with one Kalman state
per recording. Segments are processed in sorted (subject, segment) order so
outputs are byte-stable; RRFORGE_THREADS > 1 fans segment work out to a
process pool without changing the output order.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import csvio
from .config import artifact_meta, worker_threads
from .groundtruth import KalmanState, label_window
from .ica import extract_respiratory
from .quality import QualityModel, extract_quality_features, quality_score, train_quality_model
from .signals import (
    PROCESS_RATE,
    SEGMENT_SAMPLES,
    SampledSignal,
    TriaxialWindow,
    minmax_normalize,
    pad_to_length,
    random_window_offsets,
    resample_linear,
)
from .store import write_store

WRIST_ACC = ("acc_x", "acc_y", "acc_z")
WRIST_GYR = ("gyr_x", "gyr_y", "gyr_z")


@dataclass
class SegmentTask:
    subject: str
    segment: str
    wrist_path: str
    chest_path: str | None
    corrupted: bool
    sampling_mode: str = "fixed"
    windows_per_segment: int = 1
    seed: int = 0
    gt_q: float = 1.0
    gt_r0: float = 1.0

    @property
    def segment_id(self) -> str:
        return f"{self.subject}/{self.segment}"


def stable_seed(*parts) -> int:
    """Deterministic 32-bit seed from string parts (stable across runs)."""
    text = "\x1f".join(str(p) for p in parts)
    return zlib.crc32(text.encode("utf-8"))


def load_manifest(corpus_dir) -> list[dict]:
    corpus_dir = Path(corpus_dir)
    path = corpus_dir / "manifest.json"
    if not path.exists():
        raise ValueError(f"no manifest.json in corpus directory {corpus_dir}")
    with open(path) as fh:
        manifest = json.load(fh)
    rows = manifest.get("segments", [])
    if not rows:
        raise ValueError(f"corpus manifest {path} lists no segments")
    return sorted(rows, key=lambda r: (r["subject"], r["segment"]))


def manifest_tasks(corpus_dir, config: dict) -> list[SegmentTask]:
    corpus_dir = Path(corpus_dir)
    sampling = config["sampling"]
    gt = config["groundtruth"]
    tasks = []
    for row in load_manifest(corpus_dir):
        subject, seg = row["subject"], row["segment"]
        wrist = corpus_dir / subject / f"{seg}.wrist.csv"
        chest = corpus_dir / subject / f"{seg}.chest.csv"
        if not wrist.exists():
            raise ValueError(f"manifest row {subject}/{seg} has no wrist file {wrist}")
        tasks.append(
            SegmentTask(
                subject=subject,
                segment=seg,
                wrist_path=str(wrist),
                chest_path=str(chest) if chest.exists() else None,
                corrupted=bool(row.get("corrupted", False)),
                sampling_mode=sampling["mode"],
                windows_per_segment=int(sampling["windows_per_segment"]),
                seed=stable_seed(config["seed"], subject, seg),
                gt_q=float(gt["q"]),
                gt_r0=float(gt["r0"]),
            )
        )
    return tasks


def _resampled_wrist(task: SegmentTask) -> dict[str, np.ndarray]:
    signals = csvio.read_wrist_csv(task.wrist_path)
    out = {}
    for name, sig in signals.items():
        res = resample_linear(sig, PROCESS_RATE).samples
        if len(res) < SEGMENT_SAMPLES:
            res = pad_to_length(res, SEGMENT_SAMPLES)
        out[name] = res
    return out


def _window_offsets(task: SegmentTask, n_samples: int) -> list[tuple[str, int]]:
    """(window id, start index) pairs; multi-window ids get a #w suffix."""
    if task.sampling_mode == "random":
        starts = random_window_offsets(n_samples, SEGMENT_SAMPLES, task.windows_per_segment, seed=task.seed)
    else:
        starts = range(0, n_samples - SEGMENT_SAMPLES + 1, SEGMENT_SAMPLES)
    starts = list(starts)
    if len(starts) == 1:
        return [(task.segment_id, int(starts[0]))]
    return [(f"{task.segment_id}#w{i:03d}", int(s)) for i, s in enumerate(starts)]


def segment_features(task: SegmentTask) -> list[tuple[str, np.ndarray, bool]]:
    """Pass 1: (window id, feature vector, corrupted flag) per window."""
    wrist = _resampled_wrist(task)
    n = len(wrist["ppg"])
    out = []
    for window_id, start in _window_offsets(task, n):
        ppg = minmax_normalize(wrist["ppg"][start : start + SEGMENT_SAMPLES])
        feats = extract_quality_features(ppg, PROCESS_RATE)
        out.append((window_id, feats.as_vector(), task.corrupted))
    return out


def _chest_labels(task: SegmentTask, offsets: list[tuple[str, int]]) -> dict[str, tuple[float, float]]:
    """Chronological Kalman labels for every window of one recording."""
    if task.chest_path is None:
        return {}
    chest = csvio.read_chest_csv(task.chest_path)
    resampled = {}
    for name, sig in chest.items():
        res = resample_linear(sig, PROCESS_RATE).samples
        if len(res) < SEGMENT_SAMPLES:
            res = pad_to_length(res, SEGMENT_SAMPLES)
        resampled[name] = res
    state = KalmanState(process_noise=task.gt_q)
    labels: dict[str, tuple[float, float]] = {}
    for window_id, start in sorted(offsets, key=lambda p: p[1]):
        tri = TriaxialWindow(
            resampled["acc_x"][start : start + SEGMENT_SAMPLES],
            resampled["acc_y"][start : start + SEGMENT_SAMPLES],
            resampled["acc_z"][start : start + SEGMENT_SAMPLES],
            PROCESS_RATE,
        )
        state, label = label_window(tri, state, r0=task.gt_r0)
        if label is not None:
            labels[window_id] = (label.rr, label.confidence)
    return labels


def segment_bundles(args: tuple[SegmentTask, set[str]]) -> list[tuple[str, str, np.ndarray, float, float]]:
    """Pass 2: (subject, window id, channels, label, label confidence) rows."""
    task, accepted = args
    if not accepted:
        return []
    wrist = _resampled_wrist(task)
    n = len(wrist["ppg"])
    offsets = _window_offsets(task, n)
    labels = _chest_labels(task, offsets)
    rows = []
    for window_id, start in offsets:
        if window_id not in accepted:
            continue
        sl = slice(start, start + SEGMENT_SAMPLES)
        ppg = minmax_normalize(wrist["ppg"][sl])
        acc = TriaxialWindow(*(wrist[c][sl] for c in WRIST_ACC), PROCESS_RATE)
        gyr = TriaxialWindow(*(wrist[c][sl] for c in WRIST_GYR), PROCESS_RATE)
        resp_acc = extract_respiratory(acc, seed=stable_seed(window_id, "acc"))
        resp_gyr = extract_respiratory(gyr, seed=stable_seed(window_id, "gyr"))
        channels = np.stack([ppg, resp_acc, resp_gyr])
        rr, conf = labels.get(window_id, (float("nan"), 0.0))
        rows.append((task.subject, window_id, channels.astype(np.float32), rr, conf))
    return rows


def _map_tasks(fn, items):
    threads = worker_threads()
    if threads <= 1 or len(items) < 4:
        return [fn(item) for item in items]
    with Pool(processes=threads) as pool:
        return list(pool.imap(fn, items, chunksize=8))


def acquire_quality_model(
    feature_rows: list[tuple[str, np.ndarray, bool]],
    config: dict,
    model_path: str | None = None,
) -> QualityModel:
    q = config["quality"]
    if model_path is not None:
        return QualityModel.load(model_path)
    if q["train_on"] == "clean":
        train_vecs = [vec for _, vec, corrupted in feature_rows if not corrupted]
        if len(train_vecs) < 50:
            train_vecs = [vec for _, vec, _ in feature_rows]
    else:
        train_vecs = [vec for _, vec, _ in feature_rows]
    cap = int(q["max_train_windows"])
    if len(train_vecs) > cap:
        rng = np.random.default_rng(config["seed"])
        keep = rng.choice(len(train_vecs), size=cap, replace=False)
        train_vecs = [train_vecs[i] for i in sorted(keep)]
    return train_quality_model(train_vecs, nu=float(q["nu"]), gamma=float(q["gamma"]))


def prepare_corpus(corpus_dir, out_dir, config: dict, quality_model_path: str | None = None) -> dict:
    """Run the full preparation flow; returns the stats dict it also writes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = manifest_tasks(corpus_dir, config)

    feature_rows = [row for rows in _map_tasks(segment_features, tasks) for row in rows]
    model = acquire_quality_model(feature_rows, config, quality_model_path)

    scores = {wid: quality_score(vec, model) for wid, vec, _ in feature_rows}
    accepted_ids = {wid for wid, s in scores.items() if s >= 0.0}

    bundle_args = [(task, {w for w in accepted_ids if w.split("#")[0] == task.segment_id}) for task in tasks]
    records = [row for rows in _map_tasks(segment_bundles, bundle_args) for row in rows]
    records.sort(key=lambda r: (r[0], r[1]))

    write_store(out_dir / "segments.bin", [(s, w, c, rr) for s, w, c, rr, _ in records])
    model.save(out_dir / "quality_model.json")

    with open(out_dir / "rejected.csv", "w") as fh:
        fh.write("segment_id,score\n")
        for wid in sorted(scores):
            if wid not in accepted_ids:
                fh.write(f"{wid},{scores[wid]:.6f}\n")

    labeled = [r[3] for r in records if np.isfinite(r[3])]
    stats = {
        **artifact_meta(config),
        "n_windows": len(feature_rows),
        "n_accepted": len(accepted_ids),
        "n_bundles": len(records),
        "acceptance_rate": len(accepted_ids) / len(feature_rows) if feature_rows else 0.0,
        "n_labeled": len(labeled),
        "label_min": float(np.min(labeled)) if labeled else None,
        "label_max": float(np.max(labeled)) if labeled else None,
        "label_mean": float(np.mean(labeled)) if labeled else None,
        "quality_model": {
            "nu": model.nu,
            "gamma": model.gamma,
            "rho": model.rho,
            "n_support_vectors": int(len(model.coefficients)),
            "kkt_gap": model.kkt_gap,
        },
    }
    with open(out_dir / "stats.json", "w") as fh:
        json.dump(stats, fh, indent=1, sort_keys=True)
    return stats

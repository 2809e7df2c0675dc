"""Command-line surface: one executable, one subcommand per pipeline stage.

Exit codes: 0 success, 2 invalid input (bad paths, malformed specs/configs,
schema violations), 3 contract violation (subject-overlapping split). JSON
artifacts embed {config_hash, seed}; CSV artifacts get a .meta.json sidecar
with the same fields.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import csvio, pipeline
from .baselines import baseline_rr
from .config import artifact_meta, config_hash, load_config
from .errors import SplitOverlapError
from .groundtruth import label_recording
from .ica import extract_respiratory
from .metrics import evaluate_pairs
from .model import LabeledSet, ModelConfig, RRNet, TrainConfig, train_model
from .nn import load_arrays, save_arrays
from .quality import QualityModel
from .signals import (
    PROCESS_RATE,
    SEGMENT_SAMPLES,
    TriaxialWindow,
    minmax_normalize,
    pad_to_length,
    resample_linear,
)
from .store import read_store
from .synth import CorpusSpec, gen_corpus

ESTIMATE_COLUMNS = ["segment_id", "rr_est", "quality", "method"]
LABEL_COLUMNS = ["segment_id", "rr_ref", "confidence"]


def pipeline_errors(fn):
    """Map exception classes onto the stable exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SplitOverlapError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except (ValueError, OSError, json.JSONDecodeError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _write_meta(artifact_path: Path, config: dict, extra: dict | None = None) -> None:
    meta = artifact_meta(config)
    if extra:
        meta.update(extra)
    with open(artifact_path.with_suffix(artifact_path.suffix + ".meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)


@click.group()
def main():
    """Respiratory-rate estimation pipeline over wrist PPG + IMU recordings."""


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(), help="Corpus spec JSON.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Corpus output directory.")
@pipeline_errors
def synth(spec_path, out_dir):
    """Generate a seeded synthetic corpus of wrist/chest recordings."""
    out_dir = Path(out_dir)
    if not out_dir.parent.exists():
        raise ValueError(f"output directory parent does not exist: {out_dir.parent}")
    try:
        with open(spec_path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ValueError(f"spec file not found: {spec_path}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"spec file {spec_path} is not valid JSON: {exc}") from exc
    corpus = CorpusSpec.from_dict(raw)
    manifest = gen_corpus(out_dir, corpus)
    click.echo(f"wrote {len(manifest['segments'])} segments to {out_dir}")


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None, help="Run config JSON.")
@click.option("--quality-model", "quality_model_path", type=click.Path(exists=True), default=None,
              help="Reuse a trained quality model instead of fitting one.")
@pipeline_errors
def prepare(corpus_dir, out_dir, config_path, quality_model_path):
    """Segment, quality-filter, extract respiration, label; write the store."""
    config = load_config(config_path)
    stats = pipeline.prepare_corpus(corpus_dir, out_dir, config, quality_model_path)
    click.echo(
        f"accepted {stats['n_accepted']}/{stats['n_windows']} windows "
        f"({stats['acceptance_rate']:.1%}), {stats['n_labeled']} labeled"
    )


@main.command("filter")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--model-in", type=click.Path(exists=True), default=None, help="Load quality model JSON.")
@click.option("--model-out", type=click.Path(), default=None, help="Write the fitted quality model JSON.")
@pipeline_errors
def filter_cmd(corpus_dir, out_csv, config_path, model_in, model_out):
    """Run only the quality gate; write accepted window ids with scores."""
    config = load_config(config_path)
    tasks = pipeline.manifest_tasks(corpus_dir, config)
    feature_rows = [row for rows in map(pipeline.segment_features, tasks) for row in rows]
    model = pipeline.acquire_quality_model(feature_rows, config, model_in)
    if model_out:
        model.save(model_out)
    out_csv = Path(out_csv)
    from .quality import quality_score

    n_accepted = 0
    with open(out_csv, "w") as fh:
        fh.write("segment_id,score\n")
        for wid, vec, _ in feature_rows:
            score = quality_score(vec, model)
            if score >= 0.0:
                fh.write(f"{wid},{score:.6f}\n")
                n_accepted += 1
    _write_meta(out_csv, config)
    click.echo(f"accepted {n_accepted}/{len(feature_rows)} windows")


@main.command("extract-resp")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@pipeline_errors
def extract_resp(corpus_dir, out_dir, config_path):
    """Emit the ICA respiratory components of every window as CSV files."""
    config = load_config(config_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = pipeline.manifest_tasks(corpus_dir, config)
    n = 0
    for task in tasks:
        wrist = pipeline._resampled_wrist(task)
        for window_id, start in pipeline._window_offsets(task, len(wrist["ppg"])):
            sl = slice(start, start + SEGMENT_SAMPLES)
            acc = TriaxialWindow(*(wrist[c][sl] for c in pipeline.WRIST_ACC), PROCESS_RATE)
            gyr = TriaxialWindow(*(wrist[c][sl] for c in pipeline.WRIST_GYR), PROCESS_RATE)
            frame = pd.DataFrame(
                {
                    "resp_acc": extract_respiratory(acc, seed=pipeline.stable_seed(window_id, "acc")),
                    "resp_gyr": extract_respiratory(gyr, seed=pipeline.stable_seed(window_id, "gyr")),
                }
            )
            frame.to_csv(out_dir / (window_id.replace("/", "_").replace("#", "_") + ".resp.csv"), index=False)
            n += 1
    _write_meta(out_dir / "components", config, {"n_windows": n})
    click.echo(f"wrote components for {n} windows to {out_dir}")


@main.command("gt-extract")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--chest", "chest_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@pipeline_errors
def gt_extract(corpus_dir, chest_path, out_csv, config_path):
    """Label chest recordings; write segment_id,rr_ref,confidence rows."""
    config = load_config(config_path)
    q = float(config["groundtruth"]["q"])
    r0 = float(config["groundtruth"]["r0"])
    if (corpus_dir is None) == (chest_path is None):
        raise ValueError("pass exactly one of --corpus or --chest")

    rows = []
    if chest_path is not None:
        labels = _label_chest_file(chest_path, q, r0)
        stem = Path(chest_path).stem.removesuffix(".chest")
        for i, lab in enumerate(labels):
            rows.append((f"{stem}#w{i:03d}" if len(labels) > 1 else stem, lab.rr, lab.confidence))
    else:
        for task in pipeline.manifest_tasks(corpus_dir, config):
            if task.chest_path is None:
                continue
            labels = _label_chest_file(task.chest_path, q, r0)
            for i, lab in enumerate(labels):
                wid = f"{task.segment_id}#w{i:03d}" if len(labels) > 1 else task.segment_id
                rows.append((wid, lab.rr, lab.confidence))
    if not rows:
        raise ValueError("no chest recordings found to label")
    out_csv = Path(out_csv)
    with open(out_csv, "w") as fh:
        fh.write(",".join(LABEL_COLUMNS) + "\n")
        for wid, rr, conf in rows:
            fh.write(f"{wid},{rr:.6f},{conf:.6f}\n")
    _write_meta(out_csv, config)
    click.echo(f"labeled {len(rows)} windows")


def _label_chest_file(path, q: float, r0: float):
    chest = csvio.read_chest_csv(path)
    resampled = {}
    for name, sig in chest.items():
        res = resample_linear(sig, PROCESS_RATE)
        samples = res.samples
        if len(samples) < SEGMENT_SAMPLES:
            samples = pad_to_length(samples, SEGMENT_SAMPLES)
        resampled[name] = type(res)(samples, PROCESS_RATE)
    return label_recording(resampled, q=q, r0=r0)


@main.command()
@click.option("--segments", "segments_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "model_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--val-subjects", default=None, help="Comma-separated validation subject ids.")
@click.option("--train-subjects", default=None, help="Comma-separated training subject ids (default: the rest).")
@click.option("--val-count", default=2, show_default=True, help="Validation subjects when --val-subjects is unset (last N sorted).")
@click.option("--history", "history_path", type=click.Path(), default=None, help="Where to write history.csv.")
@pipeline_errors
def train(segments_path, model_path, config_path, val_subjects, train_subjects, val_count, history_path):
    """Train the regressor on a segment store with a subject-disjoint split."""
    config = load_config(config_path)
    data = read_store(segments_path)
    labeled = np.isfinite(data.y)
    if not np.any(labeled):
        raise ValueError(f"{segments_path} has no labeled segments; cannot train")
    data = LabeledSet(
        data.x[labeled],
        data.y[labeled],
        [s for s, keep in zip(data.subjects, labeled) if keep],
        [i for i, keep in zip(data.ids, labeled) if keep],
    )

    all_subjects = sorted(set(data.subjects))
    if val_subjects:
        val_ids = [s.strip() for s in val_subjects.split(",") if s.strip()]
    else:
        if val_count < 1 or val_count >= len(all_subjects):
            raise ValueError(f"--val-count must be in [1, {len(all_subjects) - 1}]")
        val_ids = all_subjects[-val_count:]
    unknown = set(val_ids) - set(all_subjects)
    if unknown:
        raise ValueError(f"validation subjects not in store: {sorted(unknown)}")
    if train_subjects:
        train_ids = [s.strip() for s in train_subjects.split(",") if s.strip()]
        unknown = set(train_ids) - set(all_subjects)
        if unknown:
            raise ValueError(f"training subjects not in store: {sorted(unknown)}")
    else:
        train_ids = [s for s in all_subjects if s not in set(val_ids)]

    def subset(subject_ids):
        mask = np.array([s in set(subject_ids) for s in data.subjects])
        return LabeledSet(
            data.x[mask],
            data.y[mask],
            [s for s, m in zip(data.subjects, mask) if m],
            [i for i, m in zip(data.ids, mask) if m],
        )

    train_set = subset(train_ids)
    val_set = subset(val_ids)

    model_cfg = ModelConfig.from_dict(config["model"])
    train_cfg = TrainConfig.from_dict({**config["train"], "seed": config["seed"]})
    net = RRNet(model_cfg, seed=config["seed"])
    history = train_model(net, train_set, val_set, train_cfg, check_split=True)

    model_path = Path(model_path)
    arrays = dict(net.state_arrays())
    arrays["__config_hash__"] = np.frombuffer(config_hash(config).encode("ascii"), dtype=np.uint8).astype(np.float64)
    save_arrays(model_path, arrays)
    _write_meta(model_path, config, {
        "param_count": net.count_params(),
        "best_val_mae": min(h.val_mae for h in history),
        "epochs_run": len(history),
        "train_subjects": sorted(train_ids),
        "val_subjects": sorted(val_ids),
    })
    history_path = Path(history_path) if history_path else model_path.parent / "history.csv"
    with open(history_path, "w") as fh:
        fh.write("epoch,train_loss,val_mae,lr\n")
        for h in history:
            fh.write(f"{h.epoch},{h.train_loss:.8f},{h.val_mae:.8f},{h.lr:.10f}\n")
    click.echo(
        f"trained {len(history)} epochs, best val MAE {min(h.val_mae for h in history):.3f} brpm, "
        f"{net.count_params()} parameters"
    )


def _load_model(model_path, config) -> RRNet:
    arrays = load_arrays(model_path)
    arrays.pop("__config_hash__", None)
    net = RRNet(ModelConfig.from_dict(config["model"]), seed=config["seed"])
    net.load_state_arrays(arrays)
    return net


@main.command()
@click.option("--method", type=click.Choice(["cnn", "baseline"]), required=True)
@click.option("--segments", "segments_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", type=click.Path(), default=None, help="Model file (cnn only).")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Raw corpus (baseline only; estimates run on raw accepted windows).")
@click.option("--subjects", default=None, help="Comma-separated subject filter.")
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@pipeline_errors
def estimate(method, segments_path, model_path, corpus_dir, subjects, out_csv, config_path):
    """Estimate RR per stored segment with the CNN or the classical baseline."""
    config = load_config(config_path)
    data = read_store(segments_path)
    keep = np.ones(len(data), dtype=bool)
    if subjects:
        wanted = {s.strip() for s in subjects.split(",") if s.strip()}
        unknown = wanted - set(data.subjects)
        if unknown:
            raise ValueError(f"subjects not in store: {sorted(unknown)}")
        keep = np.array([s in wanted for s in data.subjects])

    rows = []
    if method == "cnn":
        if model_path is None:
            raise ValueError("--model is required with --method cnn")
        if not Path(model_path).exists():
            raise ValueError(f"missing model file: {model_path}")
        net = _load_model(model_path, config)
        preds = net.predict(data.x[keep])
        for wid, rr in zip([i for i, k in zip(data.ids, keep) if k], preds):
            rows.append((wid, float(rr), 1.0))
    else:
        if corpus_dir is None:
            raise ValueError("--corpus is required with --method baseline (raw windows are re-read)")
        rows = _baseline_rows(corpus_dir, config, {i for i, k in zip(data.ids, keep) if k})

    out_csv = Path(out_csv)
    with open(out_csv, "w") as fh:
        fh.write(",".join(ESTIMATE_COLUMNS) + "\n")
        for wid, rr, quality in rows:
            fh.write(f"{wid},{rr:.6f},{quality:.6f},{method}\n")
    _write_meta(out_csv, config, {"method": method, "n_estimates": len(rows)})
    click.echo(f"estimated {len(rows)} windows with {method}")


def _baseline_rows(corpus_dir, config, wanted_ids: set[str]) -> list[tuple[str, float, float]]:
    rows = []
    for task in pipeline.manifest_tasks(corpus_dir, config):
        if not any(w.split("#")[0] == task.segment_id for w in wanted_ids):
            continue
        wrist = pipeline._resampled_wrist(task)
        for window_id, start in pipeline._window_offsets(task, len(wrist["ppg"])):
            if window_id not in wanted_ids:
                continue
            sl = slice(start, start + SEGMENT_SAMPLES)
            ppg = minmax_normalize(wrist["ppg"][sl])
            acc = TriaxialWindow(*(wrist[c][sl] for c in pipeline.WRIST_ACC), PROCESS_RATE)
            est = baseline_rr(ppg, acc, PROCESS_RATE)
            if est.available:
                rows.append((window_id, float(est.rr), float(est.quality)))
    return rows


@main.command()
@click.option("--estimates", "est_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--labels", "labels_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "report_path", required=True, type=click.Path())
@click.option("--per-subject", "per_subject_csv", type=click.Path(), default=None)
@click.option("--plot-dir", type=click.Path(), default=None, help="Write box/Bland-Altman plot data CSVs here.")
@click.option("--model-meta", type=click.Path(exists=True), default=None, help="Model .meta.json (for param_count).")
@click.option("--config", "config_path", type=click.Path(), default=None)
@pipeline_errors
def evaluate(est_csv, labels_csv, report_path, per_subject_csv, plot_dir, model_meta, config_path):
    """Join estimates with labels and write the agreement report."""
    config = load_config(config_path)
    est = pd.read_csv(est_csv)
    ref = pd.read_csv(labels_csv)
    if list(est.columns) != ESTIMATE_COLUMNS:
        raise ValueError(f"{est_csv}: expected columns {ESTIMATE_COLUMNS}, got {list(est.columns)}")
    if list(ref.columns) != LABEL_COLUMNS:
        raise ValueError(f"{labels_csv}: expected columns {LABEL_COLUMNS}, got {list(ref.columns)}")
    methods = sorted(set(est["method"]))
    if len(methods) != 1:
        raise ValueError(f"estimates mix methods {methods}; evaluate one at a time")
    joined = est.merge(ref, on="segment_id", how="inner")
    if joined.empty:
        raise ValueError("no segment ids shared between estimates and labels")

    param_count = None
    if model_meta:
        with open(model_meta) as fh:
            param_count = json.load(fh).get("param_count")

    report = evaluate_pairs(
        joined["rr_est"].to_numpy(), joined["rr_ref"].to_numpy(), method=methods[0], param_count=param_count
    )
    payload = {**report.to_dict(), **artifact_meta(config), "n_estimates": int(len(est)), "n_labels": int(len(ref))}
    report_path = Path(report_path)
    with open(report_path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)

    if per_subject_csv:
        joined["subject"] = [s.split("/")[0] for s in joined["segment_id"]]
        with open(per_subject_csv, "w") as fh:
            fh.write("subject,n,mae,rmse\n")
            for subject, grp in joined.groupby("subject", sort=True):
                d = grp["rr_est"].to_numpy() - grp["rr_ref"].to_numpy()
                fh.write(f"{subject},{len(grp)},{np.mean(np.abs(d)):.6f},{np.sqrt(np.mean(d**2)):.6f}\n")
        _write_meta(Path(per_subject_csv), config)

    if plot_dir:
        plot_dir = Path(plot_dir)
        plot_dir.mkdir(parents=True, exist_ok=True)
        d = joined["rr_est"].to_numpy() - joined["rr_ref"].to_numpy()
        mean_pair = (joined["rr_est"].to_numpy() + joined["rr_ref"].to_numpy()) / 2.0
        with open(plot_dir / "bland_altman.csv", "w") as fh:
            fh.write("mean,diff\n")
            for m, dd in zip(mean_pair, d):
                fh.write(f"{m:.6f},{dd:.6f}\n")
        with open(plot_dir / "abs_error_box.csv", "w") as fh:
            fh.write("segment_id,abs_error\n")
            for wid, dd in zip(joined["segment_id"], d):
                fh.write(f"{wid},{abs(dd):.6f}\n")

    click.echo(f"mae {report.mae:.3f} rmse {report.rmse:.3f} over {report.n} windows -> {report_path}")


if __name__ == "__main__":
    main()

import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from rrforge.config import merge_defaults
from rrforge.pipeline import (
    SegmentTask,
    _window_offsets,
    acquire_quality_model,
    load_manifest,
    manifest_tasks,
    prepare_corpus,
    segment_bundles,
    segment_features,
    stable_seed,
)
from rrforge.quality import QualityModel
from rrforge.signals import SEGMENT_SAMPLES
from rrforge.store import read_store
from rrforge.synth import CorpusSpec, gen_corpus


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One clean 50-window corpus prepared once; everything else derives."""
    base = tmp_path_factory.mktemp("pipeline")
    config = merge_defaults(None)
    manifest = gen_corpus(base / "clean", CorpusSpec(n_subjects=2, segments_per_subject=25, seed=123))
    stats = prepare_corpus(base / "clean", base / "prep", config)
    return {"base": base, "config": config, "manifest": manifest, "stats": stats}


class TestStableSeed:
    def test_deterministic_and_32_bit(self):
        s = stable_seed(0, "s00", "seg0001")
        assert s == stable_seed(0, "s00", "seg0001")
        assert 0 <= s < 2**32

    def test_sensitive_to_part_order_and_boundaries(self):
        assert stable_seed("a", "b") != stable_seed("b", "a")
        assert stable_seed("ab", "c") != stable_seed("a", "bc")
        assert stable_seed(0, "x") != stable_seed(1, "x")


class TestManifest:
    def test_missing_manifest_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="manifest"):
            load_manifest(tmp_path)

    def test_empty_segment_list_rejected(self, tmp_path):
        (tmp_path / "manifest.json").write_text(json.dumps({"segments": []}))
        with pytest.raises(ValueError, match="no segments"):
            load_manifest(tmp_path)

    def test_rows_come_back_sorted(self, workspace):
        rows = load_manifest(workspace["base"] / "clean")
        keys = [(r["subject"], r["segment"]) for r in rows]
        assert keys == sorted(keys)

    def test_tasks_carry_paths_and_seeds(self, workspace):
        tasks = manifest_tasks(workspace["base"] / "clean", workspace["config"])
        assert len(tasks) == 50
        for task in tasks:
            assert Path(task.wrist_path).exists()
            assert task.chest_path is not None and Path(task.chest_path).exists()
            assert task.seed == stable_seed(0, task.subject, task.segment)
            assert not task.corrupted

    def test_missing_wrist_file_rejected(self, workspace, tmp_path):
        broken = tmp_path / "broken"
        shutil.copytree(workspace["base"] / "clean", broken)
        next(broken.glob("s00/*.wrist.csv")).unlink()
        with pytest.raises(ValueError, match="wrist"):
            manifest_tasks(broken, workspace["config"])


class TestWindowOffsets:
    def task(self, **kw):
        return SegmentTask(subject="s00", segment="seg0000", wrist_path="x", chest_path=None, corrupted=False, **kw)

    def test_single_window_keeps_bare_id(self):
        assert _window_offsets(self.task(), SEGMENT_SAMPLES) == [("s00/seg0000", 0)]

    def test_longer_recording_gets_suffixed_windows(self):
        got = _window_offsets(self.task(), 3 * SEGMENT_SAMPLES)
        assert got == [
            ("s00/seg0000#w000", 0),
            ("s00/seg0000#w001", SEGMENT_SAMPLES),
            ("s00/seg0000#w002", 2 * SEGMENT_SAMPLES),
        ]

    def test_random_mode_is_seeded_and_in_range(self):
        t = self.task(sampling_mode="random", windows_per_segment=4, seed=9)
        a = _window_offsets(t, 5 * SEGMENT_SAMPLES)
        b = _window_offsets(t, 5 * SEGMENT_SAMPLES)
        assert a == b
        assert len(a) == 4
        assert all(0 <= s <= 4 * SEGMENT_SAMPLES for _, s in a)
        assert [w for w, _ in a] == [f"s00/seg0000#w{i:03d}" for i in range(4)]


class TestFeaturePass:
    def test_one_feature_row_per_window(self, workspace):
        task = manifest_tasks(workspace["base"] / "clean", workspace["config"])[0]
        rows = segment_features(task)
        assert len(rows) == 1
        wid, vec, corrupted = rows[0]
        assert wid == task.segment_id
        assert vec.shape == (5,)
        assert np.all(np.isfinite(vec))
        assert corrupted is False


class TestAcquireQualityModel:
    def feature_rows(self, n, seed=0):
        rng = np.random.default_rng(seed)
        return [(f"w{i}", rng.uniform(0.2, 1.0, 5), i % 2 == 0) for i in range(n)]

    def test_training_set_capped(self):
        config = merge_defaults({"quality": {"max_train_windows": 60, "train_on": "all"}})
        model = acquire_quality_model(self.feature_rows(200), config)
        assert len(model.coefficients) <= 60

    def test_saved_model_reused_verbatim(self, workspace, tmp_path):
        model_path = workspace["base"] / "prep" / "quality_model.json"
        loaded = acquire_quality_model([], workspace["config"], str(model_path))
        direct = QualityModel.load(model_path)
        assert loaded.rho == direct.rho
        assert np.array_equal(loaded.support_vectors, direct.support_vectors)

    def test_too_few_windows_rejected(self):
        with pytest.raises(ValueError, match="50"):
            acquire_quality_model(self.feature_rows(10), merge_defaults(None))


class TestBundlePass:
    def test_empty_acceptance_short_circuits(self, workspace):
        task = manifest_tasks(workspace["base"] / "clean", workspace["config"])[0]
        assert segment_bundles((task, set())) == []

    def test_bundle_row_layout(self, workspace):
        task = manifest_tasks(workspace["base"] / "clean", workspace["config"])[0]
        rows = segment_bundles((task, {task.segment_id}))
        assert len(rows) == 1
        subject, wid, channels, rr, conf = rows[0]
        assert (subject, wid) == (task.subject, task.segment_id)
        assert channels.shape == (3, SEGMENT_SAMPLES)
        assert channels.dtype == np.float32
        # ppg normalized to [-1, 1]; respiratory components likewise
        assert channels.min() >= -1.0 and channels.max() <= 1.0
        assert np.isfinite(rr) and 0.0 < conf <= 1.0


class TestPrepareCorpus:
    def test_artifacts_written(self, workspace):
        prep = workspace["base"] / "prep"
        for name in ("segments.bin", "quality_model.json", "rejected.csv", "stats.json"):
            assert (prep / name).exists()

    def test_stats_consistency(self, workspace):
        stats = workspace["stats"]
        assert stats["n_windows"] == 50
        assert stats["n_accepted"] == stats["n_bundles"]
        assert stats["acceptance_rate"] == stats["n_accepted"] / 50
        assert stats["acceptance_rate"] >= 0.8
        assert 8.0 <= stats["label_min"] <= stats["label_mean"] <= stats["label_max"] <= 25.0
        assert stats["config_hash"] and stats["seed"] == 0
        on_disk = json.loads((workspace["base"] / "prep" / "stats.json").read_text())
        assert on_disk == stats

    def test_store_labels_match_generator_truth(self, workspace):
        data = read_store(workspace["base"] / "prep" / "segments.bin")
        assert data.ids == sorted(data.ids)
        truth = {f"{r['subject']}/{r['segment']}": r["rr_truth"] for r in workspace["manifest"]["segments"]}
        labeled = [i for i in range(len(data)) if np.isfinite(data.y[i])]
        assert len(labeled) == workspace["stats"]["n_labeled"]
        assert max(abs(data.y[i] - truth[data.ids[i]]) for i in labeled) < 0.5

    def test_rejected_windows_listed_with_negative_scores(self, workspace):
        lines = (workspace["base"] / "prep" / "rejected.csv").read_text().strip().splitlines()
        assert lines[0] == "segment_id,score"
        assert len(lines) - 1 == 50 - workspace["stats"]["n_accepted"]
        stored = set(read_store(workspace["base"] / "prep" / "segments.bin").ids)
        for line in lines[1:]:
            wid, score = line.split(",")
            # raw scores are strictly negative; 6-decimal printing can round
            # a hairline rejection to -0.000000
            assert float(score) <= 0.0
            assert wid not in stored

    def test_rerun_is_byte_identical(self, workspace):
        again = workspace["base"] / "prep_again"
        prepare_corpus(workspace["base"] / "clean", again, workspace["config"])
        for name in ("segments.bin", "quality_model.json", "rejected.csv", "stats.json"):
            assert (again / name).read_bytes() == (workspace["base"] / "prep" / name).read_bytes()

    def test_corrupted_windows_rejected_with_reused_model(self, workspace):
        base = workspace["base"]
        gen_corpus(base / "mixed", CorpusSpec(n_subjects=2, segments_per_subject=10, corruption_fraction=0.5, seed=321))
        stats = prepare_corpus(
            base / "mixed", base / "prep_mixed", workspace["config"],
            quality_model_path=str(base / "prep" / "quality_model.json"),
        )
        flagged = {
            f"{r['subject']}/{r['segment']}"
            for r in json.loads((base / "mixed" / "manifest.json").read_text())["segments"]
            if r["corrupted"]
        }
        assert len(flagged) == 10
        accepted = set(read_store(base / "prep_mixed" / "segments.bin").ids)
        assert not (accepted & flagged)
        assert sum(1 for wid in accepted if wid not in flagged) >= 8
        assert stats["n_accepted"] == len(accepted)

    def test_chestless_corpus_gives_unlabeled_store(self, workspace, tmp_path):
        chestless = tmp_path / "chestless"
        shutil.copytree(workspace["base"] / "clean", chestless)
        kept = 0
        for row in json.loads((chestless / "manifest.json").read_text())["segments"]:
            chest = chestless / row["subject"] / f"{row['segment']}.chest.csv"
            if kept < 5:
                kept += 1
            else:
                chest.unlink()
        trimmed = json.loads((chestless / "manifest.json").read_text())
        trimmed["segments"] = trimmed["segments"][:10]
        (chestless / "manifest.json").write_text(json.dumps(trimmed))
        stats = prepare_corpus(
            chestless, tmp_path / "prep", workspace["config"],
            quality_model_path=str(workspace["base"] / "prep" / "quality_model.json"),
        )
        data = read_store(tmp_path / "prep" / "segments.bin")
        finite = int(np.isfinite(data.y).sum())
        assert stats["n_labeled"] == finite
        assert finite < len(data)  # the chestless rows carry NaN labels

import json

import numpy as np
import pytest

from rrforge.quality import (
    CARDIAC_BAND,
    FALLBACK_CORR,
    FALLBACK_DIST,
    FALLBACK_ENERGY,
    QualityFeatures,
    QualityModel,
    assess,
    detect_cardiac_cycles,
    extract_quality_features,
    quality_score,
    train_quality_model,
)
from rrforge.signals import SampledSignal, minmax_normalize, resample_linear
from rrforge.synth import SynthSpec, gen_segment

RATE = 100.0
N = 3200
NU = 0.03
GAMMA = 0.05


def sinusoid(freq, n=N, rate=RATE):
    t = np.arange(n) / rate
    return np.sin(2 * np.pi * freq * t)


def synth_ppg_window(seed, rr=15.0, hr=72.0, noise_std=0.05, **kw):
    """Wrist PPG from the generator, resampled to 100 Hz and normalized."""
    seg = gen_segment(SynthSpec(rr=rr, hr=hr, noise_std=noise_std, seed=seed, **kw))
    ppg = resample_linear(SampledSignal(seg.wrist["ppg"], 20.0), RATE).samples
    return minmax_normalize(ppg), seg


def clean_feature_set(n, seed0):
    rng = np.random.default_rng(seed0)
    out = []
    for i in range(n):
        win, _ = synth_ppg_window(
            seed0 + i,
            rr=float(rng.uniform(8, 25)),
            hr=float(rng.uniform(55, 90)),
            am_depth=float(rng.uniform(0.1, 0.3)),
            bw_depth=float(rng.uniform(0.08, 0.22)),
            fm_depth=float(rng.uniform(0.04, 0.12)),
        )
        out.append(extract_quality_features(win, RATE))
    return out


def noise_feature_set(n, seed0):
    out = []
    for s in range(n):
        rng = np.random.default_rng(seed0 + s)
        out.append(extract_quality_features(minmax_normalize(rng.standard_normal(N)), RATE))
    return out


@pytest.fixture(scope="module")
def train_feats():
    return clean_feature_set(120, 10_000)


@pytest.fixture(scope="module")
def clean_test_feats():
    return clean_feature_set(200, 50_000)


@pytest.fixture(scope="module")
def noise_test_feats():
    return noise_feature_set(200, 90_000)


@pytest.fixture(scope="module")
def model(train_feats):
    return train_quality_model(train_feats, nu=NU, gamma=GAMMA)


class TestDetectCardiacCycles:
    def test_sinusoid_peak_count_and_spacing(self):
        # 1.2 Hz over 32 s -> 38.4 periods, one local maximum per period.
        peaks = detect_cardiac_cycles(sinusoid(1.2), RATE)
        assert len(peaks) in (38, 39)
        gaps = np.diff(peaks) / RATE
        assert np.allclose(gaps, 1.0 / 1.2, atol=0.02)

    def test_strictly_increasing(self):
        peaks = detect_cardiac_cycles(sinusoid(1.2), RATE)
        assert np.all(np.diff(peaks) > 0)

    def test_all_zero_window_yields_too_few_peaks(self):
        assert len(detect_cardiac_cycles(np.zeros(N), RATE)) < 3

    def test_refractory_spacing_on_noise(self):
        rng = np.random.default_rng(7)
        peaks = detect_cardiac_cycles(rng.standard_normal(N), RATE)
        assert len(peaks) >= 3
        assert np.diff(peaks).min() >= int(round(0.33 * RATE))

    def test_max_gap_on_clean_ppg(self):
        # At 72 bpm beats arrive every ~0.83 s; no detected gap may exceed 2 s.
        win, _ = synth_ppg_window(3)
        peaks = detect_cardiac_cycles(win, RATE)
        assert np.max(np.diff(peaks)) / RATE <= 2.0

    def test_synth_ppg_matches_emitted_beat_times(self):
        # The generator records the systolic peak instants it placed, which
        # gives an exact reference for both count and position.
        for seed in range(4):
            win, seg = synth_ppg_window(seed, noise_std=0.02)
            peaks = detect_cardiac_cycles(win, RATE)
            assert abs(len(peaks) - 38) <= 1
            assert abs(len(peaks) - len(seg.beat_times)) <= 1
            dt = np.abs(peaks[:, None] / RATE - seg.beat_times[None, :]).min(axis=1)
            assert np.median(dt) < 0.05
            assert dt.max() < 0.1

    def test_low_rate_rejected(self):
        with pytest.raises(ValueError, match="rate"):
            detect_cardiac_cycles(np.zeros(100), 10.0)

    def test_short_window_rejected(self):
        with pytest.raises(ValueError, match="5 s"):
            detect_cardiac_cycles(np.zeros(200), RATE)


class TestExtractQualityFeatures:
    def test_pure_sinusoid_in_band(self):
        f = extract_quality_features(sinusoid(1.2), RATE)
        assert not f.fallback
        assert f.psd_ratio > 0.95
        assert f.template_corr > 0.99
        # Identical cycles collapse onto their own template.
        assert f.template_dist < 0.5
        assert f.cycle_energy > 0.0

    def test_white_noise_monte_carlo(self):
        # Flat spectrum: expected in-band fraction is the band's share of
        # [0, Nyquist], (3.0 - 0.6) / 50 = 0.048.
        feats = noise_feature_set(120, 1_000)
        ratios = np.array([f.psd_ratio for f in feats])
        corrs = np.array([f.template_corr for f in feats])
        band_fraction = (CARDIAC_BAND[1] - CARDIAC_BAND[0]) / (RATE / 2.0)
        assert abs(ratios.mean() - band_fraction) < 0.05
        assert np.all((ratios >= 0.0) & (ratios <= 1.0))
        # Noise cycles correlate with the template only through the shared
        # peak-anchored decay (each cycle starts at a detected maximum) and
        # the cycle's own 1/n contribution to the mean; measured mean is
        # ~0.32, far below the >0.99 of periodic signal.
        assert 0.2 < corrs.mean() < 0.45
        assert corrs.max() < 0.6

    def test_flat_window_falls_back(self):
        f = extract_quality_features(np.full(N, 0.3), RATE)
        assert f.fallback
        # detrend leaves ~1e-34 residual power, not an exact zero
        assert f.psd_ratio < 1e-12
        assert f.cycle_energy == FALLBACK_ENERGY
        assert f.template_corr == FALLBACK_CORR
        assert f.template_dist == FALLBACK_DIST

    def test_zero_window_falls_back(self):
        assert extract_quality_features(np.zeros(N), RATE).fallback

    def test_feature_ranges(self):
        windows = [sinusoid(1.2), sinusoid(0.7), minmax_normalize(np.random.default_rng(5).standard_normal(N))]
        win, _ = synth_ppg_window(11, motion_burst_prob=1.0, noise_std=0.3)
        windows.append(win)
        for w in windows:
            f = extract_quality_features(w, RATE)
            assert 0.0 <= f.psd_ratio <= 1.0
            assert -1.0 <= f.template_corr <= 1.0
            assert f.iqr >= 0.0
            assert f.cycle_energy >= 0.0
            assert f.template_dist >= 0.0

    def test_vector_order(self):
        f = QualityFeatures(0.1, 0.2, 0.3, 0.4, 0.5)
        assert np.array_equal(f.as_vector(), [0.1, 0.2, 0.3, 0.4, 0.5])


class TestTrainQualityModel:
    def test_training_set_acceptance(self, model, train_feats):
        # nu bounds the fraction of training outliers; the margin below
        # 1 - nu covers boundary points that land epsilon-negative.
        accepted = sum(assess(f, model)[0] for f in train_feats)
        n = len(train_feats)
        assert accepted >= (1.0 - NU) * n - n * 0.02
        assert accepted / n >= 1.0 - NU - 0.02

    def test_coefficients_on_simplex(self, model, train_feats):
        coef = model.coefficients
        assert abs(coef.sum() - 1.0) < 1e-9
        upper = 1.0 / (NU * len(train_feats))
        assert np.all(coef >= 0.0)
        assert np.all(coef <= upper + 1e-12)

    def test_solver_reaches_kkt_tolerance(self, model):
        assert model.kkt_gap < 1e-4

    def test_support_vectors_standardized_shape(self, model):
        m = len(model.coefficients)
        assert model.support_vectors.shape == (m, 5)
        assert model.mean.shape == (5,)
        assert np.all(model.scale > 0.0)

    def test_identical_rows_rejected(self):
        rows = [np.array([0.5, 0.4, 10.0, 0.9, 2.0])] * 60
        with pytest.raises(ValueError, match="identical"):
            train_quality_model(rows, nu=NU, gamma=GAMMA)

    def test_single_row_rejected(self):
        with pytest.raises(ValueError):
            train_quality_model([np.array([0.5, 0.4, 10.0, 0.9, 2.0])], nu=NU, gamma=GAMMA)

    def test_below_minimum_count_rejected(self):
        rng = np.random.default_rng(0)
        rows = list(rng.normal(size=(49, 5)))
        with pytest.raises(ValueError, match="50"):
            train_quality_model(rows, nu=NU, gamma=GAMMA)

    def test_bad_nu_rejected(self):
        rows = list(np.random.default_rng(0).normal(size=(60, 5)))
        for nu in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError, match="nu"):
                train_quality_model(rows, nu=nu, gamma=GAMMA)

    def test_bad_gamma_rejected(self):
        rows = list(np.random.default_rng(0).normal(size=(60, 5)))
        for gamma in (0.0, -2.0):
            with pytest.raises(ValueError, match="gamma"):
                train_quality_model(rows, nu=NU, gamma=gamma)

    def test_wrong_feature_width_rejected(self):
        rows = list(np.random.default_rng(0).normal(size=(60, 4)))
        with pytest.raises(ValueError, match="features"):
            train_quality_model(rows, nu=NU, gamma=GAMMA)


class TestAssess:
    def test_interior_support_vector_scores_near_zero(self, model, train_feats):
        # KKT: strictly interior alphas sit exactly on the decision surface.
        upper = 1.0 / (NU * len(train_feats))
        interior = np.where(
            (model.coefficients > 0.05 * upper) & (model.coefficients < 0.95 * upper)
        )[0]
        assert len(interior) >= 1
        for i in interior:
            raw = model.support_vectors[i] * model.scale + model.mean
            assert abs(quality_score(raw, model)) < 1e-3

    def test_far_point_rejected_at_minus_rho(self, model):
        # 12 sigma in every standardized coordinate: the RBF kernel
        # underflows and the score collapses to -rho.
        far = model.mean + 12.0 * model.scale
        accept, score = assess(far, model)
        assert not accept
        assert abs(score + model.rho) < 1e-6
        assert model.rho > 0.0

    def test_clean_heldout_accepted(self, model, clean_test_feats):
        acc = np.mean([assess(f, model)[0] for f in clean_test_feats])
        assert acc >= 0.90

    def test_white_noise_rejected(self, model, noise_test_feats):
        rej = np.mean([not assess(f, model)[0] for f in noise_test_feats])
        assert rej >= 0.90

    def test_assess_matches_score_sign(self, model, clean_test_feats, noise_test_feats):
        for f in clean_test_feats[:20] + noise_test_feats[:20]:
            accept, score = assess(f, model)
            assert score == quality_score(f, model)
            assert accept == (score >= 0.0)


class TestModelInvariants:
    def test_duplicate_training_row_leaves_decisions_unchanged(
        self, model, train_feats, clean_test_feats, noise_test_feats
    ):
        # Duplicating a point only splits its coefficient mass; the decision
        # function is unchanged up to the O(1/n) shift in the standardization
        # statistics.
        dup = train_quality_model(train_feats + [train_feats[0]], nu=NU, gamma=GAMMA)
        probes = clean_test_feats + noise_test_feats
        s_base = np.array([quality_score(f, model) for f in probes])
        s_dup = np.array([quality_score(f, dup) for f in probes])
        assert np.array_equal(s_base >= 0.0, s_dup >= 0.0)
        assert np.abs(s_base - s_dup).max() < 0.01

    def test_standardization_commutes_with_assessment(self, model, clean_test_feats, noise_test_feats):
        # Scoring raw features through the stored statistics must equal
        # scoring pre-standardized features through an identity transform.
        identity = QualityModel(
            nu=model.nu,
            gamma=model.gamma,
            rho=model.rho,
            mean=np.zeros(5),
            scale=np.ones(5),
            support_vectors=model.support_vectors,
            coefficients=model.coefficients,
        )
        for f in clean_test_feats[:30] + noise_test_feats[:30]:
            x = f.as_vector()
            xs = (x - model.mean) / model.scale
            assert abs(quality_score(x, model) - quality_score(xs, identity)) < 1e-9

    def test_json_round_trip_preserves_scores(self, model, clean_test_feats):
        clone = QualityModel.from_json(model.to_json())
        assert clone.nu == model.nu
        assert clone.gamma == model.gamma
        assert clone.rho == model.rho
        assert np.array_equal(clone.mean, model.mean)
        assert np.array_equal(clone.scale, model.scale)
        assert np.array_equal(clone.support_vectors, model.support_vectors)
        assert np.array_equal(clone.coefficients, model.coefficients)
        for f in clean_test_feats[:10]:
            assert quality_score(f, clone) == quality_score(f, model)

    def test_json_payload_fields(self, model):
        d = json.loads(model.to_json())
        assert set(d) == {"nu", "gamma", "rho", "mean", "scale", "support_vectors", "coefficients", "kkt_gap"}

    def test_save_load_file(self, model, tmp_path):
        path = tmp_path / "gate.json"
        model.save(path)
        clone = QualityModel.load(path)
        assert clone.to_json() == model.to_json()

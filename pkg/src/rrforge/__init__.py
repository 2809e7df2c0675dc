"""Respiratory-rate estimation from wrist PPG and IMU signals.

Stages: synthetic corpus generation, windowing and quality gating, ICA
respiratory extraction, chest-referenced ground-truth labeling, a from-scratch
convolutional regressor, classical modulation baselines, and agreement
metrics. The `rrforge` CLI chains them over file artifacts.
"""

from .baselines import BaselineEstimate, baseline_rr, extract_modulations
from .config import config_hash, load_config, merge_defaults
from .errors import NonFiniteError, SplitOverlapError
from .groundtruth import KalmanState, kalman_fuse, label_recording, rr_fft_axis
from .ica import IcaResult, extract_respiratory, fastica
from .metrics import EvalReport, bland_altman, evaluate_pairs, mae, rmse
from .model import LabeledSet, ModelConfig, RRNet, TrainConfig, train_model
from .quality import QualityModel, extract_quality_features, quality_score, train_quality_model
from .signals import SampledSignal, SegmentWindow, minmax_normalize, resample_linear, segment
from .spectrum import band_power_fraction, spectral_peak
from .store import read_store, write_store
from .synth import CorpusSpec, SynthSpec, gen_corpus, gen_segment

__version__ = "0.1.0"

__all__ = [
    "BaselineEstimate",
    "CorpusSpec",
    "EvalReport",
    "IcaResult",
    "KalmanState",
    "LabeledSet",
    "ModelConfig",
    "NonFiniteError",
    "QualityModel",
    "RRNet",
    "SampledSignal",
    "SegmentWindow",
    "SplitOverlapError",
    "SynthSpec",
    "TrainConfig",
    "band_power_fraction",
    "baseline_rr",
    "bland_altman",
    "config_hash",
    "evaluate_pairs",
    "extract_modulations",
    "extract_quality_features",
    "extract_respiratory",
    "fastica",
    "gen_corpus",
    "gen_segment",
    "kalman_fuse",
    "label_recording",
    "load_config",
    "mae",
    "merge_defaults",
    "minmax_normalize",
    "quality_score",
    "read_store",
    "resample_linear",
    "rmse",
    "rr_fft_axis",
    "segment",
    "spectral_peak",
    "train_model",
    "train_quality_model",
    "write_store",
    "__version__",
]

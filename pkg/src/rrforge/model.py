"""RR regressor: multi-scale dilated inception stem, strided conv stack, GAP
head; plus its training loop.

Input batches are (B, 3, input_length) float64 with channels (normalized PPG,
ACC respiratory component, GYR respiratory component); output is one brpm
scalar per segment. Targets stay in raw brpm (no target scaling), so the
SmoothL1 breakpoint at 1 brpm of error is meaningful.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import SplitOverlapError
from .nn import Adam, BatchNorm1d, Conv1d, Dense, Tensor, cosine_decay, ops
from .signals import SEGMENT_SAMPLES


@dataclass
class ModelConfig:
    input_length: int = SEGMENT_SAMPLES
    input_channels: int = 3
    branch_kernels: tuple[int, ...] = (3, 5, 7)
    branch_dilations: tuple[int, ...] = (1, 2, 4)
    stem_filters: int = 8
    max_filters: int = 1024
    conv_kernel: int = 3
    conv_stride: int = 2
    head_hidden: int = 64
    leaky_slope: float = 0.2
    head_bias_init: float = 17.0

    def validate(self) -> "ModelConfig":
        if len(self.branch_kernels) != len(self.branch_dilations) or len(self.branch_kernels) < 2:
            raise ValueError("invalid config: branch kernel/dilation lists must match and have length >= 2")
        if any(k < 1 or k % 2 == 0 for k in self.branch_kernels):
            raise ValueError("invalid config: branch kernels must be odd (same-padding rule)")
        if any(d < 1 for d in self.branch_dilations):
            raise ValueError("invalid config: dilations must be >= 1")
        if self.stem_filters < 1 or self.max_filters < self.stem_filters:
            raise ValueError("invalid config: need max_filters >= stem_filters >= 1")
        ratio = self.max_filters / self.stem_filters
        if 2 ** int(round(np.log2(ratio))) != int(ratio):
            raise ValueError(f"invalid config: max_filters must be stem_filters * 2^m, got ratio {ratio}")
        if self.conv_kernel != 3 or self.conv_stride != 2:
            raise ValueError("invalid config: the downsampling stack is fixed at kernel 3, stride 2")
        if self.head_hidden < 1 or self.input_channels < 1:
            raise ValueError("invalid config: head_hidden and input_channels must be >= 1")
        if not self.stack_plan():
            raise ValueError(f"invalid config: input_length {self.input_length} leaves no room to downsample")
        return self

    def stack_plan(self) -> list[tuple[int, int, int, int]]:
        """(in_ch, out_ch, L_in, L_out) per strided stage.

        Filters double from stem_filters to max_filters, then stay constant;
        stages run until the length drops to <= 4. Stride-2, kernel-3,
        padding-1 gives L_out = (L_in - 1) // 2 + 1.
        """
        plan = []
        length = self.input_length
        in_ch = self.input_channels
        out_ch = self.stem_filters
        while length > 4:
            l_out = (length + 2 - 2 - 1) // 2 + 1
            if l_out < 1 or l_out >= length:
                raise ValueError(f"invalid config: stack underflow at length {length}")
            plan.append((in_ch, out_ch, length, l_out))
            length = l_out
            in_ch = out_ch
            out_ch = min(out_ch * 2, self.max_filters)
        return plan

    def to_dict(self) -> dict:
        return {
            "input_length": self.input_length,
            "input_channels": self.input_channels,
            "branch_kernels": list(self.branch_kernels),
            "branch_dilations": list(self.branch_dilations),
            "stem_filters": self.stem_filters,
            "max_filters": self.max_filters,
            "conv_kernel": self.conv_kernel,
            "conv_stride": self.conv_stride,
            "head_hidden": self.head_hidden,
            "leaky_slope": self.leaky_slope,
            "head_bias_init": self.head_bias_init,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"invalid config: unknown model fields {sorted(unknown)}")
        kwargs = dict(d)
        for key in ("branch_kernels", "branch_dilations"):
            if key in kwargs:
                kwargs[key] = tuple(int(v) for v in kwargs[key])
        return cls(**kwargs).validate()


@dataclass
class TrainConfig:
    epochs: int = 100
    steps_per_epoch: int = 60
    batch_size: int = 32
    lr0: float = 1e-3
    early_stop_patience: int | None = 10  # None disables early stopping
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if min(self.epochs, self.steps_per_epoch, self.batch_size) < 1 or self.lr0 <= 0:
            raise ValueError("invalid config: epochs, steps, batch_size, lr0 must be positive")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ValueError("invalid config: patience must be positive or null")
        return self

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "steps_per_epoch": self.steps_per_epoch,
            "batch_size": self.batch_size,
            "lr0": self.lr0,
            "early_stop_patience": self.early_stop_patience,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"invalid config: unknown train fields {sorted(unknown)}")
        return cls(**d).validate()


class RRNet:
    """The assembled network. Seeded init; forward works in train/eval mode."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        slope = cfg.leaky_slope

        self.branches: list[tuple[Conv1d, BatchNorm1d]] = []
        for k, d in zip(cfg.branch_kernels, cfg.branch_dilations):
            conv = Conv1d(cfg.input_channels, cfg.stem_filters, k, dilation=d, padding=d * (k - 1) // 2, rng=rng, slope=slope)
            self.branches.append((conv, BatchNorm1d(cfg.stem_filters)))
        concat_ch = cfg.stem_filters * len(cfg.branch_kernels)
        self.project = Conv1d(concat_ch, cfg.input_channels, 1, rng=rng, slope=slope)

        self.stages: list[tuple[Conv1d, BatchNorm1d]] = []
        for in_ch, out_ch, _, _ in cfg.stack_plan():
            conv = Conv1d(in_ch, out_ch, cfg.conv_kernel, stride=cfg.conv_stride, padding=1, rng=rng, slope=slope)
            self.stages.append((conv, BatchNorm1d(out_ch)))
        last_ch = cfg.stack_plan()[-1][1]

        self.fc1 = Dense(last_ch, cfg.head_hidden, rng=rng, slope=slope)
        self.fc2 = Dense(cfg.head_hidden, 1, rng=rng, slope=slope, bias_init=cfg.head_bias_init)

    def forward(self, batch: np.ndarray | Tensor, train: bool = False) -> Tensor:
        x = batch if isinstance(batch, Tensor) else Tensor(np.asarray(batch, dtype=np.float64))
        if x.data.ndim != 3 or x.data.shape[1] != self.cfg.input_channels or x.data.shape[2] != self.cfg.input_length:
            raise ValueError(
                f"invalid shape: expected (B, {self.cfg.input_channels}, {self.cfg.input_length}), got {x.shape}"
            )
        slope = self.cfg.leaky_slope
        outs = [ops.leaky_relu(bn(conv(x), train), slope) for conv, bn in self.branches]
        merged = ops.add(self.project(ops.concat_channels(outs)), x)
        h = merged
        for conv, bn in self.stages:
            h = ops.leaky_relu(bn(conv(h), train), slope)
        h = ops.global_avg_pool(h)
        h = ops.leaky_relu(self.fc1(h), slope)
        return self.fc2(h)

    def predict(self, batch: np.ndarray, batch_size: int = 64) -> np.ndarray:
        """Eval-mode RR estimates, one per row of (N, C, L)."""
        batch = np.asarray(batch, dtype=np.float64)
        outs = []
        for i in range(0, len(batch), batch_size):
            outs.append(self.forward(batch[i : i + batch_size], train=False).data[:, 0])
        return np.concatenate(outs) if outs else np.empty(0)

    def _layer_map(self) -> dict[str, object]:
        layers: dict[str, object] = {}
        for i, (conv, bn) in enumerate(self.branches):
            layers[f"stem/branch{i}/conv"] = conv
            layers[f"stem/branch{i}/bn"] = bn
        layers["stem/project"] = self.project
        for i, (conv, bn) in enumerate(self.stages):
            layers[f"stack/{i:02d}/conv"] = conv
            layers[f"stack/{i:02d}/bn"] = bn
        layers["head/fc1"] = self.fc1
        layers["head/fc2"] = self.fc2
        return layers

    def named_parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, layer in self._layer_map().items():
            if isinstance(layer, (Conv1d, Dense)):
                out[f"{name}/weight"] = layer.weight
                out[f"{name}/bias"] = layer.bias
            else:
                out[f"{name}/gamma"] = layer.gamma
                out[f"{name}/beta"] = layer.beta
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def count_params(self) -> int:
        """Learned parameters only; BN running stats excluded."""
        return int(sum(p.size for p in self.parameters()))

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {name: p.data for name, p in self.named_parameters().items()}
        for name, layer in self._layer_map().items():
            if isinstance(layer, BatchNorm1d):
                for key, arr in layer.state_arrays().items():
                    out[f"{name}/{key}"] = arr
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        expected = set(params) | {
            f"{name}/{key}"
            for name, layer in self._layer_map().items()
            if isinstance(layer, BatchNorm1d)
            for key in ("running_mean", "running_var")
        }
        missing = expected - set(arrays)
        if missing:
            raise ValueError(f"model file is missing tensors: {sorted(missing)[:4]}...")
        for name, p in params.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(f"invalid shape for {name}: {arr.shape} vs {p.data.shape}")
            p.data = arr.copy()
        for name, layer in self._layer_map().items():
            if isinstance(layer, BatchNorm1d):
                layer.running_mean = np.asarray(arrays[f"{name}/running_mean"], dtype=np.float64).copy()
                layer.running_var = np.asarray(arrays[f"{name}/running_var"], dtype=np.float64).copy()

    def snapshot(self) -> dict[str, np.ndarray]:
        return copy.deepcopy(self.state_arrays())


@dataclass
class LabeledSet:
    """Aligned arrays: inputs (n, C, L), labels (n,) brpm, subject per row."""

    x: np.ndarray
    y: np.ndarray
    subjects: list[str]
    ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if len(self.x) != len(self.y) or len(self.x) != len(self.subjects):
            raise ValueError("x, y, subjects must align")
        if not self.ids:
            self.ids = [str(i) for i in range(len(self.y))]

    def __len__(self) -> int:
        return len(self.y)

    def sorted_by_id(self) -> "LabeledSet":
        order = np.argsort(np.asarray(self.ids, dtype=object), kind="stable")
        return LabeledSet(
            self.x[order],
            self.y[order],
            [self.subjects[i] for i in order],
            [self.ids[i] for i in order],
        )


def check_subject_disjoint(train: LabeledSet, val: LabeledSet) -> None:
    overlap = sorted(set(train.subjects) & set(val.subjects))
    if overlap:
        raise SplitOverlapError(f"train/validation share subject ids: {overlap}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float  # mean per-sample SmoothL1 across the epoch's batches
    val_mae: float
    lr: float


def train_model(
    model: RRNet,
    train_set: LabeledSet,
    val_set: LabeledSet,
    cfg: TrainConfig,
    check_split: bool = True,
) -> list[EpochStats]:
    """Adam + cosine decay over epochs x steps_per_epoch; early stop on val MAE.

    Rows are put in canonical id order before the seeded shuffle, so the
    sampler sees the same sequence regardless of input row order. The model
    is left holding the best-validation-epoch parameters. check_split=False
    is for deliberate same-data sanity runs (e.g. overfit probes); the CLI
    always enforces the subject-disjoint contract.
    """
    cfg.validate()
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("empty train or validation set")
    if np.any(~np.isfinite(train_set.y)) or np.any(~np.isfinite(val_set.y)):
        raise ValueError("labels contain NaN; corpus rows without references cannot train")
    if check_split:
        check_subject_disjoint(train_set, val_set)

    train_sorted = train_set.sorted_by_id()
    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(model.parameters())
    total_steps = cfg.epochs * cfg.steps_per_epoch
    n = len(train_sorted)

    order = rng.permutation(n)
    cursor = 0

    def next_batch() -> np.ndarray:
        nonlocal order, cursor
        if cfg.batch_size >= n:
            return rng.integers(0, n, size=cfg.batch_size)
        if cursor + cfg.batch_size > n:
            order = rng.permutation(n)
            cursor = 0
        idx = order[cursor : cursor + cfg.batch_size]
        cursor += cfg.batch_size
        return idx

    history: list[EpochStats] = []
    best_mae = np.inf
    best_state: dict[str, np.ndarray] | None = None
    stale = 0
    step = 0

    for epoch in range(cfg.epochs):
        losses = []
        lr = cfg.lr0
        for _ in range(cfg.steps_per_epoch):
            lr = cosine_decay(cfg.lr0, step, total_steps)
            idx = next_batch()
            out = model.forward(train_sorted.x[idx], train=True)
            loss = ops.smooth_l1(out, train_sorted.y[idx][:, None])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step(lr)
            losses.append(float(loss.data) / cfg.batch_size)
            step += 1

        val_pred = model.predict(val_set.x)
        val_mae = float(np.mean(np.abs(val_pred - val_set.y)))
        history.append(EpochStats(epoch=epoch, train_loss=float(np.mean(losses)), val_mae=val_mae, lr=lr))

        if val_mae < best_mae - 1e-12:
            best_mae = val_mae
            best_state = model.snapshot()
            stale = 0
        else:
            stale += 1
            if cfg.early_stop_patience is not None and stale >= cfg.early_stop_patience:
                break

    if best_state is not None:
        model.load_state_arrays(best_state)
    return history

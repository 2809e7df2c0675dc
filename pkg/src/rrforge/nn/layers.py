"""Parameterized layers: owned tensors, init rules, and batch norm state."""

from __future__ import annotations

import numpy as np

from .engine import Tensor
from . import ops


def he_std(fan_in: int, slope: float) -> float:
    # Variance-preserving init for leaky-ReLU nets.
    return float(np.sqrt(2.0 / ((1.0 + slope**2) * fan_in)))


class Conv1d:
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int = 1,
        dilation: int = 1,
        padding: int = 0,
        rng: np.random.Generator | None = None,
        slope: float = 0.2,
    ):
        rng = rng or np.random.default_rng(0)
        std = he_std(in_channels * kernel, slope)
        self.weight = Tensor(rng.normal(0.0, std, (out_channels, in_channels, kernel)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)
        self.stride = stride
        self.dilation = dilation
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv1d(x, self.weight, self.bias, stride=self.stride, dilation=self.dilation, padding=self.padding)

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


class Dense:
    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator | None = None,
        slope: float = 0.2,
        bias_init: float = 0.0,
    ):
        rng = rng or np.random.default_rng(0)
        std = he_std(in_features, slope)
        self.weight = Tensor(rng.normal(0.0, std, (out_features, in_features)), requires_grad=True)
        self.bias = Tensor(np.full(out_features, float(bias_init)), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.dense(x, self.weight, self.bias)

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


class BatchNorm1d:
    """Per-channel normalization for (B, C, L) or (B, F) tensors.

    Train mode normalizes with batch statistics (population variance) and
    updates running stats with momentum 0.9; eval mode applies the running
    stats. epsilon = 1e-5.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.9):
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.eps = eps
        self.momentum = momentum
        self.channels = channels

    def _views(self, ndim: int) -> tuple[tuple[int, ...], tuple]:
        if ndim == 3:
            return (0, 2), (None, slice(None), None)
        if ndim == 2:
            return (0,), (None, slice(None))
        raise ValueError(f"batch_norm expects 2-D or 3-D input, got {ndim}-D")

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        axes, view = self._views(x.data.ndim)
        if x.data.shape[1] != self.channels:
            raise ValueError(f"invalid shape: expected {self.channels} channels, got {x.data.shape[1]}")
        gamma, beta = self.gamma, self.beta
        gv, bv = gamma.data[view], beta.data[view]

        if train:
            if x.data.shape[0] < 2:
                raise ValueError("batch_norm train mode needs batch >= 2")
            mean = x.data.mean(axis=axes)
            var = x.data.var(axis=axes)
            self.running_mean = self.momentum * self.running_mean + (1.0 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1.0 - self.momentum) * var
            inv = 1.0 / np.sqrt(var + self.eps)
            xhat = (x.data - mean[view]) * inv[view]
            out = gv * xhat + bv
            m = x.data.size // self.channels

            def backward(g: np.ndarray) -> None:
                if beta.requires_grad:
                    beta.accumulate_grad(g.sum(axis=axes))
                if gamma.requires_grad:
                    gamma.accumulate_grad((g * xhat).sum(axis=axes))
                if x.requires_grad:
                    gxhat = g * gv
                    mean_g = gxhat.sum(axis=axes) / m
                    mean_gx = (gxhat * xhat).sum(axis=axes) / m
                    gx = inv[view] * (gxhat - mean_g[view] - xhat * mean_gx[view])
                    x.accumulate_grad(gx)

            return Tensor(out, parents=(x, gamma, beta), backward=backward, op="batch_norm(train)")

        inv = 1.0 / np.sqrt(self.running_var + self.eps)
        out = gv * ((x.data - self.running_mean[view]) * inv[view]) + bv
        xhat_eval = (x.data - self.running_mean[view]) * inv[view]

        def backward(g: np.ndarray) -> None:
            if beta.requires_grad:
                beta.accumulate_grad(g.sum(axis=axes))
            if gamma.requires_grad:
                gamma.accumulate_grad((g * xhat_eval).sum(axis=axes))
            if x.requires_grad:
                x.accumulate_grad(g * gv * inv[view])

        return Tensor(out, parents=(x, gamma, beta), backward=backward, op="batch_norm(eval)")

    def parameters(self) -> list[Tensor]:
        return [self.gamma, self.beta]

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {"running_mean": self.running_mean, "running_var": self.running_var}

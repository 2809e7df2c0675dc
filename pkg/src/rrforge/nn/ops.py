"""Differentiable operations over Tensors.

Forward paths are numpy/BLAS-heavy: conv1d lowers to an im2col matmul built
from k strided slices, and its input gradient re-scatters through the same k
slices, so no per-element Python loops touch the hot path.
"""

from __future__ import annotations

import numpy as np

from .engine import Tensor, as_tensor


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, dilation: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of (B, C_in, L) with (C_out, C_in, k) kernels.

    L_out = floor((L + 2*padding - dilation*(k-1) - 1) / stride) + 1.
    """
    if stride < 1 or dilation < 1 or padding < 0:
        raise ValueError(f"invalid conv hyperparameters s={stride} d={dilation} p={padding}")
    if x.data.ndim != 3 or w.data.ndim != 3:
        raise ValueError(f"conv1d expects (B,C,L) x and (O,C,k) w, got {x.shape} and {w.shape}")
    batch, c_in, length = x.data.shape
    c_out, c_in_w, k = w.data.shape
    if c_in != c_in_w:
        raise ValueError(f"channel mismatch: input has {c_in}, kernel expects {c_in_w}")
    l_out = (length + 2 * padding - dilation * (k - 1) - 1) // stride + 1
    if l_out < 1:
        raise ValueError(f"invalid shape: conv output length {l_out} for input length {length}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    cols = np.empty((batch, c_in, k, l_out), dtype=np.float64)
    for j in range(k):
        start = j * dilation
        cols[:, :, j, :] = xp[:, :, start : start + stride * (l_out - 1) + 1 : stride]
    cols_flat = cols.reshape(batch, c_in * k, l_out)
    w_flat = w.data.reshape(c_out, c_in * k)
    out = np.matmul(w_flat, cols_flat)
    if b is not None:
        if b.data.shape != (c_out,):
            raise ValueError(f"bias must be ({c_out},), got {b.data.shape}")
        out = out + b.data[None, :, None]

    parents = (x, w) if b is None else (x, w, b)

    def backward(g: np.ndarray) -> None:
        if w.requires_grad:
            gw = np.matmul(g, cols_flat.transpose(0, 2, 1)).sum(axis=0)
            w.accumulate_grad(gw.reshape(w.data.shape))
        if b is not None and b.requires_grad:
            b.accumulate_grad(g.sum(axis=(0, 2)))
        if x.requires_grad:
            gcols = np.matmul(w_flat.T, g).reshape(batch, c_in, k, l_out)
            gxp = np.zeros((batch, c_in, length + 2 * padding), dtype=np.float64)
            for j in range(k):
                start = j * dilation
                gxp[:, :, start : start + stride * (l_out - 1) + 1 : stride] += gcols[:, :, j, :]
            gx = gxp[:, :, padding : padding + length] if padding else gxp
            x.accumulate_grad(gx)

    return Tensor(out, parents=parents, backward=backward, op=f"conv1d(k={k},s={stride},d={dilation})")


def dense(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map (B, f_in) @ (f_out, f_in)^T + b."""
    if x.data.ndim != 2 or w.data.ndim != 2:
        raise ValueError(f"dense expects 2-D x and w, got {x.shape} and {w.shape}")
    if x.data.shape[1] != w.data.shape[1]:
        raise ValueError(f"invalid shape: x features {x.data.shape[1]} vs w features {w.data.shape[1]}")
    out = x.data @ w.data.T
    if b is not None:
        if b.data.shape != (w.data.shape[0],):
            raise ValueError(f"bias must be ({w.data.shape[0]},), got {b.data.shape}")
        out = out + b.data[None, :]
    parents = (x, w) if b is None else (x, w, b)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(g @ w.data)
        if w.requires_grad:
            w.accumulate_grad(g.T @ x.data)
        if b is not None and b.requires_grad:
            b.accumulate_grad(g.sum(axis=0))

    return Tensor(out, parents=parents, backward=backward, op="dense")


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    """y = x for x > 0 else slope*x; subgradient at 0 is slope."""
    positive = x.data > 0
    out = np.where(positive, x.data, slope * x.data)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(g * np.where(positive, 1.0, slope))

    return Tensor(out, parents=(x,), backward=backward, op="leaky_relu")


def global_avg_pool(x: Tensor) -> Tensor:
    """(B, C, L) -> (B, C) mean over length."""
    if x.data.ndim != 3:
        raise ValueError(f"global_avg_pool expects (B,C,L), got {x.shape}")
    length = x.data.shape[2]
    out = x.data.mean(axis=2)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(np.repeat(g[:, :, None], length, axis=2) / length)

    return Tensor(out, parents=(x,), backward=backward, op="global_avg_pool")


def concat_channels(tensors: list[Tensor]) -> Tensor:
    """Concatenate (B, C_i, L) tensors along channels."""
    if not tensors:
        raise ValueError("nothing to concatenate")
    shapes = [t.data.shape for t in tensors]
    if any(len(s) != 3 for s in shapes) or len({(s[0], s[2]) for s in shapes}) != 1:
        raise ValueError(f"invalid shape: cannot concat {shapes}")
    out = np.concatenate([t.data for t in tensors], axis=1)
    splits = np.cumsum([s[1] for s in shapes])[:-1]

    def backward(g: np.ndarray) -> None:
        for t, piece in zip(tensors, np.split(g, splits, axis=1)):
            if t.requires_grad:
                t.accumulate_grad(piece)

    return Tensor(out, parents=tuple(tensors), backward=backward, op="concat")


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise residual addition of equal shapes."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"invalid shape: add {a.shape} vs {b.shape}")
    out = a.data + b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g)

    return Tensor(out, parents=(a, b), backward=backward, op="add")


def smooth_l1(pred: Tensor, target) -> Tensor:
    """Sum over the batch of SmoothL1(target - pred).

    Per element, with d = target - pred: 0.5*d^2 when |d| < 1, else |d| - 0.5.
    Gradient w.r.t. pred is -d inside the quadratic zone, -sign(d) outside.
    """
    target = as_tensor(target)
    if pred.data.shape != target.data.shape:
        raise ValueError(f"invalid shape: loss over {pred.shape} vs {target.shape}")
    d = target.data - pred.data
    absd = np.abs(d)
    quad = absd < 1.0
    per = np.where(quad, 0.5 * d**2, absd - 0.5)
    out = per.sum()

    def backward(g: np.ndarray) -> None:
        if pred.requires_grad:
            gp = np.where(quad, -d, -np.sign(d)) * g
            pred.accumulate_grad(gp)
        if target.requires_grad:
            gt = np.where(quad, d, np.sign(d)) * g
            target.accumulate_grad(gt)

    return Tensor(out, parents=(pred, target), backward=backward, op="smooth_l1")

from .engine import Tensor, as_tensor, ensure_finite
from . import ops
from .layers import BatchNorm1d, Conv1d, Dense
from .optim import Adam, adam_step, cosine_decay
from .serialize import load_arrays, save_arrays

__all__ = [
    "Tensor",
    "as_tensor",
    "ensure_finite",
    "ops",
    "BatchNorm1d",
    "Conv1d",
    "Dense",
    "Adam",
    "adam_step",
    "cosine_decay",
    "load_arrays",
    "save_arrays",
]

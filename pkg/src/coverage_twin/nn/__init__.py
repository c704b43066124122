import ctypes as _ctypes

# Training churns through short-lived multi-hundred-MB im2col buffers.
# Keeping them on the heap instead of per-allocation mmap/munmap cycles
# (glibc M_MMAP_THRESHOLD) avoids refaulting the pages on every step.
try:
    _ctypes.CDLL("libc.so.6").mallopt(-3, 1 << 30)
except (OSError, AttributeError):
    pass

from .autodiff import Tensor, clip, concat, exp, log, relu
from .layers import conv2d, dense, dropout, maxpool2, upsample2
from .losses import gaussian_nll, kl_diag_gaussian, mse
from .optim import Adam, AdamState, adam_step
from .checkpoint import load_params, save_params

__all__ = [
    "Tensor", "clip", "concat", "exp", "log", "relu",
    "conv2d", "dense", "dropout", "maxpool2", "upsample2",
    "gaussian_nll", "kl_diag_gaussian", "mse",
    "Adam", "AdamState", "adam_step",
    "load_params", "save_params",
]

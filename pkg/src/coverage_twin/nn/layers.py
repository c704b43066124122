"""Network layers built on the autodiff Tensor.

Convolution is cross-correlation (no kernel flip) via im2col, stride 1.
All layers accept a single sample (C,H,W / n-vector) or a batch with a
leading N axis.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


def _as_batch(x: Tensor, ndim_single: int):
    """Return (tensor, was_single) with a leading batch axis ensured."""
    if x.data.ndim == ndim_single:
        return x.reshape((1,) + x.data.shape), True
    if x.data.ndim == ndim_single + 1:
        return x, False
    raise ValueError(f"expected {ndim_single}- or {ndim_single + 1}-d input, "
                     f"got shape {x.data.shape}")


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor, padding: str = "same") -> Tensor:
    """2-D convolution. x: (N,)C_in,H,W; kernels: C_out,C_in,k,k; bias: C_out."""
    x, single = _as_batch(x, 3)
    co, ci, kh, kw = kernels.data.shape
    if kh != kw or kh % 2 == 0:
        raise ValueError(f"kernel must be square with odd size, got {kh}x{kw}")
    k = kh
    n, cx, h, w = x.data.shape
    if cx != ci:
        raise ValueError(f"input has {cx} channels, kernels expect {ci}")
    if padding == "same":
        pad = k // 2
    elif padding == "valid":
        pad = 0
        if h < k or w < k:
            raise ValueError("input smaller than kernel with valid padding")
    else:
        raise ValueError(f"unknown padding {padding!r}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = h + 2 * pad - k + 1, w + 2 * pad - k + 1
    windows = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    # (n, ci, ho, wo, k, k) -> (n*ho*wo, ci*k*k)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, ci * k * k)
    wmat = kernels.data.reshape(co, ci * k * k)
    out = (cols @ wmat.T + bias.data).reshape(n, ho, wo, co).transpose(0, 3, 1, 2)

    def back(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, co)
        dw = (gmat.T @ cols).reshape(co, ci, k, k)
        db = gmat.sum(axis=0)
        dcols = (gmat @ wmat).reshape(n, ho, wo, ci, k, k)
        # scatter in channels-last layout (contiguous writes), then one
        # transpose back to NCHW
        dxp = np.zeros((n, h + 2 * pad, w + 2 * pad, ci))
        for i in range(k):
            for j in range(k):
                dxp[:, i:i + ho, j:j + wo, :] += dcols[:, :, :, :, i, j]
        if pad:
            dxp = dxp[:, pad:pad + h, pad:pad + w, :]
        return np.ascontiguousarray(dxp.transpose(0, 3, 1, 2)), dw, db

    res = Tensor._result(out, (x, kernels, bias), back)
    return res.reshape(res.data.shape[1:]) if single else res


def maxpool2(x: Tensor) -> Tensor:
    """2x2 non-overlapping max pool; ties route gradient to first occurrence."""
    x, single = _as_batch(x, 3)
    n, c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    blocks = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = blocks.reshape(n, c, h // 2, w // 2, 4)
    winner = flat.argmax(axis=-1)     # first occurrence on ties
    out = np.take_along_axis(flat, winner[..., None], axis=-1)[..., 0]

    def back(g):
        gflat = np.zeros((n, c, h // 2, w // 2, 4))
        np.put_along_axis(gflat, winner[..., None], g[..., None], axis=-1)
        dx = (gflat.reshape(n, c, h // 2, w // 2, 2, 2)
              .transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w))
        return (dx,)

    res = Tensor._result(out, (x,), back)
    return res.reshape(res.data.shape[1:]) if single else res


def upsample2(x: Tensor) -> Tensor:
    """Nearest-neighbour 2x spatial upsampling."""
    x, single = _as_batch(x, 3)
    n, c, h, w = x.data.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)

    def back(g):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)

    res = Tensor._result(out, (x,), back)
    return res.reshape(res.data.shape[1:]) if single else res


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map W x + b. x: (N,)n; weight: m x n; bias: m."""
    x, single = _as_batch(x, 1)
    m, nin = weight.data.shape
    if x.data.shape[1] != nin:
        raise ValueError(f"dense expects input dim {nin}, got {x.data.shape[1]}")
    out = x.data @ weight.data.T + bias.data

    def back(g):
        return g @ weight.data, g.T @ x.data, g.sum(axis=0)

    res = Tensor._result(out, (x, weight, bias), back)
    return res.reshape(res.data.shape[1:]) if single else res


def dropout(x: Tensor, rate: float, mode: str, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; identity in eval mode."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x * 1.0
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return x * Tensor(mask)

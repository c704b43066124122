"""Loss functions, composed from differentiable primitives."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, _wrap, exp, log


def mse(a, b) -> Tensor:
    """Mean squared elementwise difference."""
    a, b = _wrap(a), _wrap(b)
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    d = a - b
    return (d * d).mean()


def gaussian_nll(mu, var, y) -> Tensor:
    """Sum_i 0.5 * ((mu_i - y_i)^2 / var_i + ln var_i)."""
    mu, var = _wrap(mu), _wrap(var)
    y = np.asarray(y, dtype=np.float64)
    if np.any(var.data <= 0):
        raise ValueError("variance must be strictly positive")
    r = mu - Tensor(y)
    return (0.5 * (r * r / var + log(var))).sum()


def kl_diag_gaussian(mu, logvar) -> Tensor:
    """KL( N(mu, diag e^logvar) || N(0, I) ), closed form."""
    mu, logvar = _wrap(mu), _wrap(logvar)
    return (0.5 * (mu * mu + exp(logvar) - 1.0 - logvar)).sum()

import numpy as np
import pytest


def finite_difference_grad(f, tensor, h=1e-6):
    """Central-difference gradient of scalar f() w.r.t. tensor.data."""
    g = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = float(f().data)
        flat[i] = orig - h
        lo = float(f().data)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * h)
    return g


def check_gradients(f, tensors, rtol=1e-5, h=1e-6):
    """Assert analytic grads of scalar f() match central differences.

    Error metric: ||ga - gfd|| / max(||ga||, ||gfd||, 1), per tensor.
    """
    for t in tensors:
        t.grad = None
    out = f()
    out.backward()
    for t in tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        fd = finite_difference_grad(f, t, h=h)
        denom = max(np.linalg.norm(analytic), np.linalg.norm(fd), 1.0)
        err = np.linalg.norm(analytic - fd) / denom
        assert err <= rtol, f"gradient mismatch: rel err {err:.3e} > {rtol}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

import numpy as np
import pytest


def numerical_gradient(func, tensor, h=1e-5):
    """Central finite differences of a scalar-valued func wrt tensor.data."""
    grad = np.zeros_like(tensor.data)
    it = np.nditer(tensor.data, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = tensor.data[i]
        tensor.data[i] = orig + h
        f_plus = func().data.item()
        tensor.data[i] = orig - h
        f_minus = func().data.item()
        tensor.data[i] = orig
        grad[i] = (f_plus - f_minus) / (2 * h)
    return grad


def relative_error(analytic, numeric):
    scale = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), 1e-12)
    return np.max(np.abs(analytic - numeric)) / scale


def check_gradients(func, tensors, tol, h=1e-5):
    """Backward through func once, then compare each tensor's grad to FD."""
    for t in tensors:
        t.zero_grad()
    loss = func()
    loss.backward()
    for t in tensors:
        err = relative_error(t.grad, numerical_gradient(func, t, h=h))
        assert err < tol, f"gradient relative error {err} >= {tol}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

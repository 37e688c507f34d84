import numpy as np
import pytest


def numeric_grad(f, arr, h=1e-5):
    """Central finite differences of scalar f with respect to every entry of arr.

    arr is perturbed in place and restored; must be float64 for the h to be
    meaningful.
    """
    grad = np.zeros_like(arr, dtype=np.float64)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + h
        fp = f()
        arr[idx] = orig - h
        fm = f()
        arr[idx] = orig
        grad[idx] = (fp - fm) / (2 * h)
    return grad


def max_rel_err(analytic, numeric, floor=1.0):
    denom = np.maximum(np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

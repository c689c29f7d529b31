"""Finite-difference verification of reverse-mode gradients."""

import logging
from typing import Callable

import numpy as np

from autodiff.tensor import Tensor, gradients, no_grad

logger = logging.getLogger(__name__)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| / max(1e-8, |a| + |n|) over all elements."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))


def numeric_gradient(f: Callable[[Tensor], Tensor], x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central differences of scalar f at x (float64)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    with no_grad():
        for index in np.ndindex(*x.shape):
            original = x[index]
            x[index] = original + h
            plus = f(Tensor(x.copy())).item()
            x[index] = original - h
            minus = f(Tensor(x.copy())).item()
            x[index] = original
            grad[index] = (plus - minus) / (2.0 * h)
    return grad


def grad_check(f: Callable[[Tensor], Tensor], x, h: float = 1e-4) -> float:
    """Compare backward() against central differences; returns max relative error.

    `x` is promoted to float64 so the comparison measures the backward
    rules, not single-precision rounding. Parameters captured inside `f`
    should be float64 too.
    """
    data = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    probe = Tensor(data.copy(), requires_grad=True)
    (analytic,) = gradients(f(probe), [probe])
    numeric = numeric_gradient(f, data, h)
    error = relative_error(analytic, numeric)
    logger.debug("grad_check over %d element(s): max relative error %.3e", data.size, error)
    return error

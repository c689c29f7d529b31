"""Parameter initialisation."""

import math

import numpy as np

from autodiff.tensor import Tensor


def fans(shape: tuple[int, ...]) -> tuple[int, int]:
    """(fan_in, fan_out) for dense (out, in) or conv (out, in, *k) shapes."""
    if len(shape) == 1:
        return shape[0], shape[0]
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
    return shape[1] * receptive, shape[0] * receptive


def glorot_uniform(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    name: str = "",
    dtype=np.float32,
    fan: tuple[int, int] | None = None,
) -> Tensor:
    fan_in, fan_out = fan or fans(shape)
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    data = rng.uniform(-limit, limit, size=shape).astype(dtype)
    return Tensor(data, requires_grad=True, name=name)


def constant(shape: tuple[int, ...], value: float, name: str = "", dtype=np.float32) -> Tensor:
    return Tensor(np.full(shape, value, dtype=dtype), requires_grad=True, name=name)

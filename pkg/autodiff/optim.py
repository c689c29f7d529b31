"""Adam optimizer over a list of trainable tensors."""

import logging
from typing import Sequence

import numpy as np

from autodiff.tensor import Tensor
from errors import DimensionError, NumericDivergenceError

logger = logging.getLogger(__name__)


class Adam:
    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros(p.shape, dtype=np.float64) for p in self.params]
        self._v = [np.zeros(p.shape, dtype=np.float64) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        """Apply one update. `grads` lines up with `params`; frozen tensors are skipped."""
        if len(grads) != len(self.params):
            raise DimensionError(f"got {len(grads)} gradients for {len(self.params)} parameters")
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for param, grad, m, v in zip(self.params, grads, self._m, self._v):
            if not param.requires_grad:
                continue
            grad = np.asarray(grad, dtype=np.float64)
            if not np.all(np.isfinite(grad)):
                raise NumericDivergenceError(f"non-finite gradient for parameter '{param.name}'")
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            update = self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            param.data = (param.data - update).astype(param.dtype)

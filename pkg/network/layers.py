"""Named parameter storage and the small layer blocks the network is built from."""

import logging
from typing import Iterable, Optional

import numpy as np

from autodiff.init import constant, glorot_uniform
from autodiff.ops import activate, conv2d, conv_transpose, dense, layer_norm
from autodiff.tensor import Tensor
from config import ConvSpec
from errors import FormatError

logger = logging.getLogger(__name__)


class ParameterSet:
    """Ordered name -> Tensor registry shared by every block of one network."""

    def __init__(self, rng: np.random.Generator, dtype=np.float32):
        self.rng = rng
        self.dtype = dtype
        self._tensors: dict[str, Tensor] = {}

    def glorot(self, name: str, shape: tuple[int, ...], fan: Optional[tuple[int, int]] = None) -> Tensor:
        return self._add(name, glorot_uniform(self.rng, shape, name=name, dtype=self.dtype, fan=fan))

    def constant(self, name: str, shape: tuple[int, ...], value: float) -> Tensor:
        return self._add(name, constant(shape, value, name=name, dtype=self.dtype))

    def _add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name '{name}'")
        self._tensors[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self):
        return iter(self._tensors.items())

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def select(self, prefixes: Iterable[str]) -> list[Tensor]:
        prefixes = tuple(prefixes)
        return [tensor for name, tensor in self._tensors.items() if name.startswith(prefixes)]

    def count(self, prefixes: Optional[Iterable[str]] = None) -> int:
        tensors = self._tensors.values() if prefixes is None else self.select(prefixes)
        return sum(tensor.size for tensor in tensors)

    def set_trainable(self, trainable: Iterable[Tensor]) -> None:
        """Only the given tensors require gradients afterwards."""
        keep = {id(tensor) for tensor in trainable}
        for tensor in self._tensors.values():
            tensor.requires_grad = id(tensor) in keep

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: tensor.numpy() for name, tensor in self._tensors.items()}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> list[str]:
        """Copy matching tensors in; returns the names loaded."""
        if strict:
            missing = set(self._tensors) - set(state)
            unexpected = set(state) - set(self._tensors)
            if missing or unexpected:
                raise FormatError(
                    f"checkpoint does not match network: missing {sorted(missing)[:5]}, "
                    f"unexpected {sorted(unexpected)[:5]}"
                )
        loaded = []
        for name, values in state.items():
            if name not in self._tensors:
                continue
            tensor = self._tensors[name]
            if tuple(values.shape) != tensor.shape:
                raise FormatError(f"tensor '{name}' has shape {values.shape}, network expects {tensor.shape}")
            tensor.data = np.asarray(values, dtype=tensor.dtype).copy()
            loaded.append(name)
        logger.debug("Loaded %d of %d parameter tensor(s)", len(loaded), len(self._tensors))
        return loaded


class ConvBlock:
    """conv2d -> layer norm (per-channel gain/bias) -> relu."""

    def __init__(self, params: ParameterSet, prefix: str, in_channels: int, spec: ConvSpec):
        self.spec = spec
        self.kernel = params.glorot(f"{prefix}.kernel", (spec.channels, in_channels, spec.kernel, spec.kernel))
        self.bias = params.constant(f"{prefix}.bias", (spec.channels,), 0.0)
        self.gain = params.constant(f"{prefix}.norm_gain", (spec.channels, 1, 1), 1.0)
        self.shift = params.constant(f"{prefix}.norm_bias", (spec.channels, 1, 1), 0.0)

    def __call__(self, x: Tensor) -> Tensor:
        y = conv2d(x, self.kernel, self.bias, stride=self.spec.stride, padding=self.spec.padding)
        return activate(layer_norm(y, self.gain, self.shift), "relu")


class TransposedBlock:
    """Transposed conv (2-D or 3-D); hidden stages add layer norm + relu, the last a sigmoid."""

    def __init__(
        self,
        params: ParameterSet,
        prefix: str,
        in_channels: int,
        spec: ConvSpec,
        spatial_dims: int,
        final: bool,
        normalize: bool = True,
    ):
        self.spec = spec
        self.final = final
        self.normalize = normalize and not final
        shape = (in_channels, spec.channels) + (spec.kernel,) * spatial_dims
        receptive = spec.kernel ** spatial_dims
        self.kernel = params.glorot(f"{prefix}.kernel", shape, fan=(in_channels * receptive, spec.channels * receptive))
        self.bias = params.constant(f"{prefix}.bias", (spec.channels,), 0.0)
        if self.normalize:
            ones = (spec.channels,) + (1,) * spatial_dims
            self.gain = params.constant(f"{prefix}.norm_gain", ones, 1.0)
            self.shift = params.constant(f"{prefix}.norm_bias", ones, 0.0)

    def __call__(self, x: Tensor) -> Tensor:
        y = conv_transpose(x, self.kernel, self.bias, stride=self.spec.stride, padding=self.spec.padding)
        if self.final:
            return activate(y, "sigmoid")
        if self.normalize:
            y = layer_norm(y, self.gain, self.shift)
        return activate(y, "relu")


class DenseLayer:
    def __init__(self, params: ParameterSet, prefix: str, in_dim: int, out_dim: int, activation: Optional[str] = None):
        self.activation = activation
        self.weight = params.glorot(f"{prefix}.weight", (out_dim, in_dim))
        self.bias = params.constant(f"{prefix}.bias", (out_dim,), 0.0)

    def __call__(self, x: Tensor) -> Tensor:
        y = dense(x, self.weight, self.bias)
        return y if self.activation is None else activate(y, self.activation)

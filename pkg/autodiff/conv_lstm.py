"""Convolutional LSTM cell: LSTM gates computed by "same"-padded convolutions."""

import logging
from dataclasses import dataclass

import numpy as np

from autodiff.ops import activate, conv2d
from autodiff.tensor import Tensor
from errors import ConfigurationError, DimensionError

logger = logging.getLogger(__name__)

# Gate blocks along the output-channel axis of both kernels.
GATE_ORDER = ("input", "forget", "output", "candidate")


@dataclass(frozen=True)
class ConvLstmState:
    hidden: Tensor
    cell: Tensor

    def __post_init__(self):
        if self.hidden.shape != self.cell.shape:
            raise DimensionError(f"hidden {self.hidden.shape} and cell {self.cell.shape} differ")

    @classmethod
    def zeros(cls, channels: int, height: int, width: int, dtype=np.float32) -> "ConvLstmState":
        shape = (channels, height, width)
        return cls(Tensor(np.zeros(shape, dtype=dtype)), Tensor(np.zeros(shape, dtype=dtype)))


@dataclass(frozen=True)
class ConvLstmWeights:
    """Stacked gate parameters.

    input_kernel:     (4*C, Cin, k, k)
    recurrent_kernel: (4*C, C, k, k)
    bias:             (4*C,)
    """

    input_kernel: Tensor
    recurrent_kernel: Tensor
    bias: Tensor

    def __post_init__(self):
        four_c, _, kh, kw = self.input_kernel.shape
        if four_c % 4:
            raise ConfigurationError(f"gate kernel has {four_c} output channels, not a multiple of 4")
        if kh != kw or kh % 2 == 0:
            raise ConfigurationError(f"ConvLSTM kernels must be square and odd for same padding, got {kh}x{kw}")
        channels = four_c // 4
        if self.recurrent_kernel.shape != (four_c, channels, kh, kw):
            raise DimensionError(
                f"recurrent kernel {self.recurrent_kernel.shape} does not match {(four_c, channels, kh, kw)}"
            )
        if self.bias.shape != (four_c,):
            raise DimensionError(f"gate bias {self.bias.shape} does not match {four_c}")

    @property
    def channels(self) -> int:
        return self.input_kernel.shape[0] // 4

    @property
    def kernel_size(self) -> int:
        return self.input_kernel.shape[2]

    def parameters(self) -> list[Tensor]:
        return [self.input_kernel, self.recurrent_kernel, self.bias]


def conv_lstm_step(x: Tensor, state: ConvLstmState, weights: ConvLstmWeights) -> ConvLstmState:
    """One recurrent step.

    i, f, o = sigmoid(Wx*x + Wh*h + b), g = tanh(...)
    cell' = f * cell + i * g, hidden' = o * tanh(cell')
    """
    channels = weights.channels
    if state.hidden.shape[0] != channels:
        raise DimensionError(f"state has {state.hidden.shape[0]} channels, weights expect {channels}")
    if x.shape[1:] != state.hidden.shape[1:]:
        raise DimensionError(f"input spatial dims {x.shape[1:]} differ from state {state.hidden.shape[1:]}")

    pad = weights.kernel_size // 2
    pre = conv2d(x, weights.input_kernel, weights.bias, stride=1, padding=pad)
    pre = pre + conv2d(state.hidden, weights.recurrent_kernel, None, stride=1, padding=pad)

    blocks = [pre[k * channels:(k + 1) * channels] for k in range(4)]
    input_gate, forget_gate, output_gate = (activate(b, "sigmoid") for b in blocks[:3])
    candidate = activate(blocks[3], "tanh")

    cell = forget_gate * state.cell + input_gate * candidate
    hidden = output_gate * activate(cell, "tanh")
    return ConvLstmState(hidden=hidden, cell=cell)


def conv_lstm_unroll(frames: list[Tensor], weights: ConvLstmWeights, state: ConvLstmState) -> ConvLstmState:
    for frame in frames:
        state = conv_lstm_step(frame, state, weights)
    return state

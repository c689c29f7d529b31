"""Per-modality sequence encoder: conv stack per frame, ConvLSTM over time, dense feature."""

import logging
from typing import Sequence

from autodiff.conv_lstm import ConvLstmState, ConvLstmWeights, conv_lstm_step
from autodiff.tensor import Tensor
from config import EncoderConfig
from errors import DimensionError
from network.layers import ConvBlock, DenseLayer, ParameterSet

logger = logging.getLogger(__name__)

FORGET_BIAS = 1.0
MAX_FRAMES = 10


class SequenceEncoder:
    def __init__(self, params: ParameterSet, prefix: str, cfg: EncoderConfig):
        self.cfg = cfg
        self.prefix = prefix
        self.conv1 = ConvBlock(params, f"{prefix}.conv1", 1, cfg.conv1)
        self.conv2 = ConvBlock(params, f"{prefix}.conv2", cfg.conv1.channels, cfg.conv2)

        channels, k = cfg.lstm_channels, cfg.lstm_kernel
        bias = params.constant(f"{prefix}.lstm.bias", (4 * channels,), 0.0)
        bias.data[channels:2 * channels] = FORGET_BIAS
        self.lstm = ConvLstmWeights(
            input_kernel=params.glorot(f"{prefix}.lstm.input_kernel", (4 * channels, cfg.conv2.channels, k, k)),
            recurrent_kernel=params.glorot(f"{prefix}.lstm.recurrent_kernel", (4 * channels, channels, k, k)),
            bias=bias,
        )
        self.feature = DenseLayer(params, f"{prefix}.feature", cfg.flat_dim, cfg.feature_dim, activation="tanh")

    @property
    def trunk_prefixes(self) -> tuple[str, ...]:
        """Parameters trained by autoencoder pretraining (everything but the dense feature)."""
        return (f"{self.prefix}.conv1.", f"{self.prefix}.conv2.", f"{self.prefix}.lstm.")

    def _check(self, frames: Sequence[Tensor]) -> None:
        if not 1 <= len(frames) <= MAX_FRAMES:
            raise DimensionError(f"encoder takes 1..{MAX_FRAMES} frames, got {len(frames)}")
        expected = (1, self.cfg.input_size, self.cfg.input_size)
        for frame in frames:
            if frame.shape != expected:
                raise DimensionError(f"frame shape {frame.shape} does not match {expected}")

    def hidden_states(self, frames: Sequence[Tensor]) -> list[Tensor]:
        """ConvLSTM hidden state after each frame."""
        self._check(frames)
        extent = self.cfg.hidden_extent
        state = ConvLstmState.zeros(self.cfg.lstm_channels, extent, extent, dtype=self.lstm.bias.dtype)
        hidden = []
        for frame in frames:
            state = conv_lstm_step(self.conv2(self.conv1(frame)), state, self.lstm)
            hidden.append(state.hidden)
        return hidden

    def encode(self, frames: Sequence[Tensor]) -> Tensor:
        """Final hidden state, flattened, through the dense tanh projection."""
        return self.feature(self.hidden_states(frames)[-1].flatten())

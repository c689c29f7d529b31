"""Tests for autodiff/conv_lstm.py."""

import numpy as np
import pytest

from autodiff.conv_lstm import ConvLstmState, ConvLstmWeights, conv_lstm_step, conv_lstm_unroll
from autodiff.gradcheck import grad_check
from autodiff.tensor import Tensor
from errors import ConfigurationError, DimensionError


def make_weights(rng, channels=2, in_channels=3, k=3, scale=0.3):
    return ConvLstmWeights(
        input_kernel=Tensor(rng.standard_normal((4 * channels, in_channels, k, k)) * scale),
        recurrent_kernel=Tensor(rng.standard_normal((4 * channels, channels, k, k)) * scale),
        bias=Tensor(rng.standard_normal(4 * channels) * scale),
    )


class TestConvLstmWeights:
    def test_even_kernel_rejected(self, rng):
        with pytest.raises(ConfigurationError):
            make_weights(rng, k=2)

    def test_recurrent_shape_checked(self, rng):
        weights = make_weights(rng)
        with pytest.raises(DimensionError):
            ConvLstmWeights(weights.input_kernel, Tensor(np.zeros((8, 3, 3, 3))), weights.bias)

    def test_properties(self, rng):
        weights = make_weights(rng, channels=2, k=3)
        assert weights.channels == 2
        assert weights.kernel_size == 3
        assert len(weights.parameters()) == 3


class TestConvLstmStep:
    def test_same_padding_keeps_extent(self, rng):
        weights = make_weights(rng)
        state = conv_lstm_step(Tensor(rng.standard_normal((3, 5, 5))), ConvLstmState.zeros(2, 5, 5, np.float64), weights)
        assert state.hidden.shape == (2, 5, 5)
        assert state.cell.shape == (2, 5, 5)

    def test_hidden_bounded(self, rng):
        weights = make_weights(rng, scale=3.0)
        state = ConvLstmState.zeros(2, 4, 4, np.float64)
        for _ in range(5):
            state = conv_lstm_step(Tensor(rng.standard_normal((3, 4, 4)) * 10), state, weights)
        assert np.all(np.abs(state.hidden.data) <= 1.0)

    def test_zero_weights_give_zero_hidden(self):
        zeros = ConvLstmWeights(
            Tensor(np.zeros((8, 3, 3, 3))), Tensor(np.zeros((8, 2, 3, 3))), Tensor(np.zeros(8))
        )
        state = conv_lstm_step(Tensor(np.ones((3, 4, 4))), ConvLstmState.zeros(2, 4, 4, np.float64), zeros)
        # i = f = o = 0.5, g = 0: cell stays zero
        assert np.allclose(state.cell.data, 0.0)
        assert np.allclose(state.hidden.data, 0.0)

    def test_cell_recurrence_matches_formula(self, rng):
        weights = make_weights(rng, channels=1, in_channels=1, k=1)
        x = Tensor(np.full((1, 1, 1), 0.7))
        previous = ConvLstmState(Tensor(np.full((1, 1, 1), 0.2)), Tensor(np.full((1, 1, 1), -0.4)))
        state = conv_lstm_step(x, previous, weights)
        wx = weights.input_kernel.data.reshape(4)
        wh = weights.recurrent_kernel.data.reshape(4)
        pre = wx * 0.7 + wh * 0.2 + weights.bias.data
        sig = 1.0 / (1.0 + np.exp(-pre))
        cell = sig[1] * -0.4 + sig[0] * np.tanh(pre[3])
        assert np.isclose(state.cell.data.item(), cell)
        assert np.isclose(state.hidden.data.item(), sig[2] * np.tanh(cell))

    def test_spatial_mismatch(self, rng):
        with pytest.raises(DimensionError):
            conv_lstm_step(Tensor(np.ones((3, 4, 4))), ConvLstmState.zeros(2, 5, 5), make_weights(rng))

    def test_order_matters(self, rng):
        weights = make_weights(rng, scale=1.0)
        frames = [Tensor(rng.standard_normal((3, 4, 4))) for _ in range(3)]
        forward = conv_lstm_unroll(frames, weights, ConvLstmState.zeros(2, 4, 4, np.float64))
        backward = conv_lstm_unroll(frames[::-1], weights, ConvLstmState.zeros(2, 4, 4, np.float64))
        assert not np.allclose(forward.hidden.data, backward.hidden.data)

    def test_unrolled_gradient(self, rng):
        weights = make_weights(rng)
        later = Tensor(rng.standard_normal((3, 4, 4)))
        readout = rng.standard_normal((2, 4, 4))

        def f(first):
            state = conv_lstm_unroll([first, later], weights, ConvLstmState.zeros(2, 4, 4, np.float64))
            return (state.hidden * readout).sum()

        assert grad_check(f, rng.standard_normal((3, 4, 4))) < 1e-4

    def test_recurrent_kernel_gradient(self, rng):
        weights = make_weights(rng)
        frames = [Tensor(rng.standard_normal((3, 4, 4))) for _ in range(3)]
        readout = rng.standard_normal((2, 4, 4))

        def f(recurrent):
            w = ConvLstmWeights(weights.input_kernel, recurrent, weights.bias)
            state = conv_lstm_unroll(frames, w, ConvLstmState.zeros(2, 4, 4, np.float64))
            return (state.hidden * readout).sum()

        assert grad_check(f, weights.recurrent_kernel) < 1e-4

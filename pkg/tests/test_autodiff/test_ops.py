"""Tests for autodiff/ops.py: brute-force oracles and finite-difference checks."""

import math

import numpy as np
import pytest

from autodiff.gradcheck import grad_check
from autodiff.ops import (
    activate,
    conv2d,
    conv3d_transpose,
    conv_output_extent,
    conv_transpose,
    cross_entropy,
    dense,
    l2_normalize,
    layer_norm,
    loss_bce,
    loss_mse,
    signed_sqrt,
    softmax,
    sum_pool,
    transposed_output_extent,
)
from autodiff.tensor import Tensor, gradients
from errors import ConfigurationError, DimensionError, InvalidInputError

LAYER_TOLERANCE = 1e-4


def brute_conv2d(x, kernel, stride, padding):
    cin, height, width = x.shape
    cout, _, kh, kw = kernel.shape
    padded = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    out_h = (height + 2 * padding - kh) // stride + 1
    out_w = (width + 2 * padding - kw) // stride + 1
    out = np.zeros((cout, out_h, out_w))
    for o in range(cout):
        for i in range(out_h):
            for j in range(out_w):
                patch = padded[:, i * stride:i * stride + kh, j * stride:j * stride + kw]
                out[o, i, j] = np.sum(patch * kernel[o])
    return out


def brute_conv_transpose2d(x, kernel, stride, padding):
    cin, height, width = x.shape
    _, cout, kh, kw = kernel.shape
    full = np.zeros((cout, (height - 1) * stride + kh, (width - 1) * stride + kw))
    for c in range(cin):
        for i in range(height):
            for j in range(width):
                full[:, i * stride:i * stride + kh, j * stride:j * stride + kw] += x[c, i, j] * kernel[c]
    return full[:, padding:full.shape[1] - padding, padding:full.shape[2] - padding]


def f64(rng, *shape):
    return rng.standard_normal(shape).astype(np.float64)


class TestExtents:
    def test_encoder_trace(self):
        after_conv1 = conv_output_extent(88, 7, 4, 3)
        assert after_conv1 == 22
        assert conv_output_extent(after_conv1, 3, 2, 1) == 11

    def test_decoder_trace(self):
        extents = [1]
        for k, s, p in [(2, 1, 0), (2, 2, 0), (2, 2, 0), (3, 2, 1), (4, 2, 1)]:
            extents.append(transposed_output_extent(extents[-1], k, s, p))
        assert extents == [1, 2, 4, 8, 15, 30]


class TestConv2d:
    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1), (4, 3)])
    def test_matches_brute_force(self, rng, stride, padding):
        x = f64(rng, 2, 9, 9)
        kernel = f64(rng, 3, 2, 3, 3)
        out = conv2d(Tensor(x), Tensor(kernel), stride=stride, padding=padding)
        assert np.allclose(out.data, brute_conv2d(x, kernel, stride, padding))

    def test_bias_added_per_channel(self, rng):
        x = f64(rng, 1, 5, 5)
        kernel = f64(rng, 2, 1, 3, 3)
        bias = np.array([1.0, -2.0])
        out = conv2d(Tensor(x), Tensor(kernel), Tensor(bias), padding=1)
        plain = conv2d(Tensor(x), Tensor(kernel), padding=1)
        assert np.allclose(out.data - plain.data, bias[:, None, None])

    def test_identity_kernel_is_exact(self, rng):
        x = f64(rng, 3, 6, 7)
        kernel = np.eye(3).reshape(3, 3, 1, 1)
        out = conv2d(Tensor(x), Tensor(kernel))
        assert np.array_equal(out.data, x)

    def test_channel_mismatch(self, rng):
        with pytest.raises(DimensionError):
            conv2d(Tensor(f64(rng, 2, 5, 5)), Tensor(f64(rng, 3, 1, 3, 3)))

    def test_gradient_wrt_input(self, rng):
        kernel = Tensor(f64(rng, 3, 2, 3, 3))
        weights = f64(rng, 3, 4, 4)
        error = grad_check(lambda x: (conv2d(x, kernel, stride=2, padding=1) * weights).sum(), f64(rng, 2, 7, 7))
        assert error < LAYER_TOLERANCE

    def test_gradient_wrt_kernel(self, rng):
        x = Tensor(f64(rng, 2, 7, 7))
        weights = f64(rng, 3, 4, 4)
        error = grad_check(lambda k: (conv2d(x, k, stride=2, padding=1) * weights).sum(), f64(rng, 3, 2, 3, 3))
        assert error < LAYER_TOLERANCE

    def test_gradient_wrt_bias(self, rng):
        x = Tensor(f64(rng, 1, 5, 5))
        kernel = Tensor(f64(rng, 2, 1, 3, 3))
        weights = f64(rng, 2, 5, 5)
        error = grad_check(lambda b: (conv2d(x, kernel, b, padding=1) * weights).sum(), f64(rng, 2))
        assert error < LAYER_TOLERANCE


class TestConvTranspose:
    @pytest.mark.parametrize("kernel_size,stride,padding", [(2, 1, 0), (2, 2, 0), (3, 2, 1), (4, 2, 1), (8, 4, 2)])
    def test_matches_brute_force(self, rng, kernel_size, stride, padding):
        x = f64(rng, 2, 4, 4)
        kernel = f64(rng, 2, 3, kernel_size, kernel_size)
        out = conv_transpose(Tensor(x), Tensor(kernel), stride=stride, padding=padding)
        assert np.allclose(out.data, brute_conv_transpose2d(x, kernel, stride, padding))

    def test_adjoint_of_conv2d(self, rng):
        kernel = f64(rng, 3, 2, 3, 3)
        y = f64(rng, 2, 7, 7)
        x = f64(rng, 3, 4, 4)
        forward = conv2d(Tensor(y), Tensor(kernel), stride=2, padding=1).data
        adjoint = conv_transpose(Tensor(x), Tensor(kernel), stride=2, padding=1).data
        assert math.isclose(np.sum(forward * x), np.sum(y * adjoint), rel_tol=1e-10)

    def test_3d_output_extent(self, rng):
        out = conv3d_transpose(Tensor(f64(rng, 4, 8, 8, 8)), Tensor(f64(rng, 4, 2, 3, 3, 3)), stride=2, padding=1)
        assert out.shape == (2, 15, 15, 15)

    def test_3d_rejects_image_input(self, rng):
        with pytest.raises(DimensionError):
            conv3d_transpose(Tensor(f64(rng, 2, 4, 4)), Tensor(f64(rng, 2, 2, 3, 3)))

    def test_non_positive_extent(self, rng):
        with pytest.raises(ConfigurationError):
            conv_transpose(Tensor(f64(rng, 1, 1, 1)), Tensor(f64(rng, 1, 1, 2, 2)), stride=1, padding=2)

    def test_3d_gradients(self, rng):
        kernel = Tensor(f64(rng, 2, 2, 3, 3, 3))
        bias = Tensor(f64(rng, 2))
        x = Tensor(f64(rng, 2, 2, 2, 2))
        weights = f64(rng, 2, 3, 3, 3)
        assert grad_check(lambda t: (conv_transpose(t, kernel, bias, 2, 1) * weights).sum(), x) < LAYER_TOLERANCE
        assert grad_check(lambda k: (conv_transpose(x, k, bias, 2, 1) * weights).sum(), kernel) < LAYER_TOLERANCE
        assert grad_check(lambda b: (conv_transpose(x, kernel, b, 2, 1) * weights).sum(), bias) < LAYER_TOLERANCE


class TestLayerNorm:
    def test_normalizes_to_zero_mean_unit_variance(self, rng):
        x = Tensor(f64(rng, 3, 4, 4) * 5.0 + 2.0)
        out = layer_norm(x, Tensor(np.ones((3, 1, 1))), Tensor(np.zeros((3, 1, 1))))
        assert abs(out.data.mean()) < 1e-9
        assert abs(out.data.var() - 1.0) < 1e-3

    def test_constant_input_is_finite(self):
        out = layer_norm(Tensor(np.full((2, 3, 3), 4.0)), Tensor(np.ones((2, 1, 1))), Tensor(np.zeros((2, 1, 1))))
        assert np.all(np.isfinite(out.data))
        assert np.allclose(out.data, 0.0)

    @pytest.mark.parametrize("shift", [-3.0, 0.5, 40.0])
    def test_shift_invariant(self, rng, shift):
        x = f64(rng, 3, 4, 4)
        gain = Tensor(f64(rng, 3, 1, 1))
        bias = Tensor(f64(rng, 3, 1, 1))
        base = layer_norm(Tensor(x), gain, bias)
        shifted = layer_norm(Tensor(x + shift), gain, bias)
        assert np.max(np.abs(shifted.data - base.data)) < 1e-6

    def test_bad_gain_shape(self, rng):
        with pytest.raises(DimensionError):
            layer_norm(Tensor(f64(rng, 3, 4, 4)), Tensor(np.ones((2, 1, 1))), Tensor(np.zeros((3, 1, 1))))

    def test_gradients(self, rng):
        gain = Tensor(f64(rng, 3, 1, 1))
        bias = Tensor(f64(rng, 3, 1, 1))
        x = Tensor(f64(rng, 3, 4, 4))
        weights = f64(rng, 3, 4, 4)
        assert grad_check(lambda t: (layer_norm(t, gain, bias) * weights).sum(), x) < LAYER_TOLERANCE
        assert grad_check(lambda g: (layer_norm(x, g, bias) * weights).sum(), gain) < LAYER_TOLERANCE
        assert grad_check(lambda b: (layer_norm(x, gain, b) * weights).sum(), bias) < LAYER_TOLERANCE


class TestDenseAndActivations:
    def test_dense_value(self):
        out = dense(Tensor(np.array([1.0, 2.0])), Tensor(np.array([[1.0, 0.0], [2.0, 3.0]])), Tensor(np.array([0.5, -1.0])))
        assert np.allclose(out.data, [1.5, 7.0])

    def test_dense_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            dense(Tensor(f64(rng, 3)), Tensor(f64(rng, 2, 4)))

    def test_dense_gradients(self, rng):
        weight = Tensor(f64(rng, 4, 5))
        x = Tensor(f64(rng, 5))
        weights = f64(rng, 4)
        assert grad_check(lambda t: (dense(t, weight) * weights).sum(), x) < LAYER_TOLERANCE
        assert grad_check(lambda w: (dense(x, w) * weights).sum(), weight) < LAYER_TOLERANCE

    @pytest.mark.parametrize("kind", ["sigmoid", "tanh", "relu"])
    def test_activation_gradients(self, rng, kind):
        weights = f64(rng, 12)
        x = f64(rng, 12)
        x[np.abs(x) < 0.05] = 0.5
        assert grad_check(lambda t: (activate(t, kind) * weights).sum(), x) < LAYER_TOLERANCE

    def test_sigmoid_range(self):
        out = activate(Tensor(np.array([-1000.0, 0.0, 1000.0])), "sigmoid")
        assert np.allclose(out.data, [0.0, 0.5, 1.0])

    def test_unknown_activation(self):
        with pytest.raises(InvalidInputError):
            activate(Tensor(np.ones(2)), "gelu")


class TestSoftmaxAndCrossEntropy:
    def test_equal_logits_uniform(self):
        assert np.allclose(softmax(Tensor(np.zeros(4))).data, 0.25)

    def test_sums_to_one(self, rng):
        assert abs(softmax(Tensor(f64(rng, 4) * 30.0)).data.sum() - 1.0) < 1e-6

    def test_softmax_gradient(self, rng):
        weights = f64(rng, 4)
        assert grad_check(lambda z: (softmax(z) * weights).sum(), f64(rng, 4)) < LAYER_TOLERANCE

    def test_cross_entropy_value(self):
        loss = cross_entropy(Tensor(np.zeros(4)), 1)
        assert math.isclose(loss.item(), math.log(4.0), rel_tol=1e-9)

    def test_cross_entropy_gradient(self, rng):
        assert grad_check(lambda z: cross_entropy(z, 2), f64(rng, 4)) < LAYER_TOLERANCE

    def test_cross_entropy_bad_target(self):
        with pytest.raises(DimensionError):
            cross_entropy(Tensor(np.zeros(4)), 4)


class TestLosses:
    def test_mse_value(self):
        loss = loss_mse(Tensor(np.array([1.0, 3.0])), np.array([0.0, 1.0]))
        assert math.isclose(loss.item(), 2.5)

    def test_mse_gradient(self, rng):
        target = f64(rng, 6)
        assert grad_check(lambda p: loss_mse(p, target), f64(rng, 6)) < LAYER_TOLERANCE

    def test_bce_half_is_log_two(self):
        loss = loss_bce(Tensor(np.full(8, 0.5)), np.array([0, 1] * 4, dtype=np.float64))
        assert math.isclose(loss.item(), math.log(2.0), rel_tol=1e-9)

    def test_bce_perfect_prediction_near_zero(self):
        target = np.array([0.0, 1.0, 1.0])
        assert loss_bce(Tensor(target.copy()), target).item() < 1e-6

    def test_bce_clamps_instead_of_infinity(self):
        loss = loss_bce(Tensor(np.array([0.0])), np.array([1.0]))
        assert math.isfinite(loss.item())

    def test_bce_rejects_soft_target(self):
        with pytest.raises(InvalidInputError):
            loss_bce(Tensor(np.array([0.5])), np.array([0.3]))

    def test_bce_gradient(self, rng):
        target = (rng.random(10) > 0.5).astype(np.float64)
        pred = rng.uniform(0.1, 0.9, 10)
        assert grad_check(lambda p: loss_bce(p, target), pred) < LAYER_TOLERANCE

    def test_bce_target_gets_no_gradient(self):
        pred = Tensor(np.array([0.3, 0.6]), requires_grad=True)
        target = Tensor(np.array([0.0, 1.0]), requires_grad=True)
        _, grad_target = gradients(loss_bce(pred, target), [pred, target])
        assert np.array_equal(grad_target, np.zeros(2))


class TestPoolingOps:
    def test_sum_pool(self):
        out = sum_pool(Tensor(np.arange(1.0, 7.0)), 2)
        assert np.array_equal(out.data, [3.0, 7.0, 11.0])

    def test_sum_pool_length_mismatch(self):
        with pytest.raises(DimensionError):
            sum_pool(Tensor(np.ones(5)), 2)

    def test_signed_sqrt_keeps_sign(self):
        out = signed_sqrt(Tensor(np.array([-4.0, 0.0, 9.0])))
        assert np.allclose(out.data, [-2.0, 0.0, 3.0])

    def test_signed_sqrt_gradient(self, rng):
        x = rng.uniform(0.5, 2.0, 6) * rng.choice([-1.0, 1.0], 6)
        weights = f64(rng, 6)
        assert grad_check(lambda t: (signed_sqrt(t) * weights).sum(), x) < LAYER_TOLERANCE

    def test_l2_normalize_unit_norm(self, rng):
        out = l2_normalize(Tensor(f64(rng, 10)))
        assert abs(np.linalg.norm(out.data) - 1.0) < 1e-9

    def test_l2_normalize_gradient(self, rng):
        weights = f64(rng, 5)
        assert grad_check(lambda t: (l2_normalize(t) * weights).sum(), f64(rng, 5)) < LAYER_TOLERANCE

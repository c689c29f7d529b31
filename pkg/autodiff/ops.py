"""Forward operations with analytic backward rules.

Shapes are per sample: images are (C, H, W), volumes (C, D, H, W),
vectors (n,). Batching happens one level up, in the training loop.
"""

import logging
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit, log_softmax, softmax as _softmax

from autodiff.tensor import Tensor, TensorLike, ensure_tensor, unbroadcast
from errors import ConfigurationError, DimensionError, InvalidInputError

logger = logging.getLogger(__name__)

BCE_CLAMP = 1e-7
LAYER_NORM_EPSILON = 1e-5
ACTIVATIONS = ("sigmoid", "tanh", "relu")


def conv_output_extent(extent: int, kernel: int, stride: int, padding: int) -> int:
    return (extent + 2 * padding - kernel) // stride + 1


def transposed_output_extent(extent: int, kernel: int, stride: int, padding: int) -> int:
    return (extent - 1) * stride + kernel - 2 * padding


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Cross-correlation of a (Cin, H, W) input with a (Cout, Cin, kh, kw) kernel."""
    if x.ndim != 3 or kernel.ndim != 4:
        raise DimensionError(f"conv2d expects (C,H,W) input and 4-D kernel, got {x.shape} and {kernel.shape}")
    if stride < 1 or padding < 0:
        raise InvalidInputError(f"conv2d needs stride >= 1 and padding >= 0, got {stride}, {padding}")
    cin, height, width = x.shape
    cout, kernel_cin, kh, kw = kernel.shape
    if kernel_cin != cin:
        raise DimensionError(f"kernel expects {kernel_cin} input channels, input has {cin}")
    if bias is not None and bias.shape != (cout,):
        raise DimensionError(f"bias shape {bias.shape} does not match {cout} output channels")
    if kh > height + 2 * padding or kw > width + 2 * padding:
        raise DimensionError(f"kernel {kh}x{kw} exceeds padded input {height + 2 * padding}x{width + 2 * padding}")

    out_h = conv_output_extent(height, kh, stride, padding)
    out_w = conv_output_extent(width, kw, stride, padding)
    padded = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(out_h * out_w, cin * kh * kw)
    weight = kernel.data.reshape(cout, -1)

    out = (cols @ weight.T).T.reshape(cout, out_h, out_w)
    if bias is not None:
        out = out + bias.data[:, None, None]

    def _backward(grad):
        flat = grad.reshape(cout, out_h * out_w)
        grad_kernel = (flat @ cols).reshape(kernel.shape)
        grad_cols = (weight.T @ flat).reshape(cin, kh, kw, out_h, out_w)
        grad_padded = np.zeros(padded.shape, dtype=np.result_type(grad, padded))
        for i in range(kh):
            for j in range(kw):
                grad_padded[:, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += grad_cols[:, i, j]
        grad_x = grad_padded[:, padding:padding + height, padding:padding + width]
        if bias is None:
            return grad_x, grad_kernel
        return grad_x, grad_kernel, grad.sum(axis=(1, 2))

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor.from_op(out, parents, _backward)


def conv_transpose(
    x: Tensor,
    kernel: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Transposed convolution for (Cin, *S) inputs and (Cin, Cout, *k) kernels.

    Every input element scatters a kernel-weighted copy into the output
    window it maps to; overlaps accumulate, then `padding` is cropped from
    each side, so each output extent is (n - 1) * stride + k - 2 * padding.
    """
    spatial = x.shape[1:]
    if kernel.ndim != x.ndim + 1 or not spatial:
        raise DimensionError(f"kernel rank {kernel.ndim} does not fit input rank {x.ndim}")
    if stride < 1 or padding < 0:
        raise InvalidInputError(f"conv_transpose needs stride >= 1 and padding >= 0, got {stride}, {padding}")
    cin, cout = kernel.shape[0], kernel.shape[1]
    ksize = kernel.shape[2:]
    if x.shape[0] != cin:
        raise DimensionError(f"kernel expects {cin} input channels, input has {x.shape[0]}")
    if bias is not None and bias.shape != (cout,):
        raise DimensionError(f"bias shape {bias.shape} does not match {cout} output channels")

    full = tuple((n - 1) * stride + k for n, k in zip(spatial, ksize))
    extents = tuple(f - 2 * padding for f in full)
    if any(extent < 1 for extent in extents):
        raise ConfigurationError(f"transposed conv output extent {extents} is not positive")

    flat_x = x.data.reshape(cin, -1)
    offsets = list(np.ndindex(*ksize))
    targets = [
        (slice(None),) + tuple(slice(o, o + stride * (n - 1) + 1, stride) for o, n in zip(offset, spatial))
        for offset in offsets
    ]
    crop = (slice(None),) + tuple(slice(padding, padding + e) for e in extents)

    full_out = np.zeros((cout,) + full, dtype=np.result_type(x.data, kernel.data))
    for offset, target in zip(offsets, targets):
        tap = kernel.data[(slice(None), slice(None)) + offset]
        full_out[target] += (tap.T @ flat_x).reshape((cout,) + spatial)
    out = np.ascontiguousarray(full_out[crop])
    if bias is not None:
        out = out + bias.data.reshape((cout,) + (1,) * len(spatial))

    def _backward(grad):
        grad_full = np.zeros(full_out.shape, dtype=np.result_type(grad, full_out))
        grad_full[crop] = grad
        grad_x = np.zeros(flat_x.shape, dtype=grad_full.dtype)
        grad_kernel = np.zeros(kernel.shape, dtype=grad_full.dtype)
        for offset, target in zip(offsets, targets):
            window = grad_full[target].reshape(cout, -1)
            tap = kernel.data[(slice(None), slice(None)) + offset]
            grad_x += tap @ window
            grad_kernel[(slice(None), slice(None)) + offset] = flat_x @ window.T
        grad_x = grad_x.reshape(x.shape)
        if bias is None:
            return grad_x, grad_kernel
        return grad_x, grad_kernel, grad.sum(axis=tuple(range(1, grad.ndim)))

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor.from_op(out, parents, _backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, epsilon: float = LAYER_NORM_EPSILON) -> Tensor:
    """Normalise over all features of one sample, then scale and shift.

    `gain` and `bias` broadcast against `x` (per-channel (C,1,1) for
    feature maps, full shape for vectors).
    """
    if x.size < 1:
        raise DimensionError("layer_norm needs at least one feature")
    for name, param in (("gain", gain), ("bias", bias)):
        try:
            if np.broadcast_shapes(param.shape, x.shape) != x.shape:
                raise ValueError
        except ValueError as exc:
            raise DimensionError(f"{name} shape {param.shape} does not broadcast over {x.shape}") from exc

    values = x.data.astype(np.float64)
    centered = values - values.mean()
    variance = float(np.mean(centered * centered))
    inv_std = 1.0 / np.sqrt(variance + epsilon) if variance + epsilon > 0 else 0.0
    normalized = centered * inv_std
    out_dtype = np.result_type(x.data, gain.data)
    out = (gain.data * normalized + bias.data).astype(out_dtype)

    def _backward(grad):
        grad = grad.astype(np.float64)
        grad_norm = grad * gain.data
        grad_x = inv_std * (grad_norm - grad_norm.mean() - normalized * np.mean(grad_norm * normalized))
        return (
            grad_x,
            unbroadcast(grad * normalized, gain.shape),
            unbroadcast(grad, bias.shape),
        )

    return Tensor.from_op(out, (x, gain, bias), _backward)


def dense(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """y = W x + b for a vector x."""
    if x.ndim != 1 or weight.ndim != 2 or weight.shape[1] != x.shape[0]:
        raise DimensionError(f"dense cannot apply weight {weight.shape} to input {x.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise DimensionError(f"bias shape {bias.shape} does not match {weight.shape[0]} outputs")

    out = weight.data @ x.data
    if bias is not None:
        out = out + bias.data

    def _backward(grad):
        grad_x = weight.data.T @ grad
        grad_w = np.outer(grad, x.data)
        return (grad_x, grad_w) if bias is None else (grad_x, grad_w, grad)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, _backward)


def activate(x: Tensor, kind: str) -> Tensor:
    if kind == "sigmoid":
        out = expit(x.data)
        return Tensor.from_op(out, (x,), lambda grad: (grad * out * (1.0 - out),))
    if kind == "tanh":
        out = np.tanh(x.data)
        return Tensor.from_op(out, (x,), lambda grad: (grad * (1.0 - out * out),))
    if kind == "relu":
        mask = x.data > 0
        return Tensor.from_op(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda grad: (grad * mask,))
    raise InvalidInputError(f"unknown activation '{kind}', expected one of {ACTIVATIONS}")


def softmax(logits: Tensor) -> Tensor:
    out = _softmax(logits.data.astype(np.float64)).astype(logits.dtype)

    def _backward(grad):
        return (out * (grad - np.sum(grad * out)),)

    return Tensor.from_op(out, (logits,), _backward)


def cross_entropy(logits: Tensor, target_index: int) -> Tensor:
    """Negative log-likelihood of `target_index` under softmax(logits)."""
    if logits.ndim != 1 or not 0 <= target_index < logits.shape[0]:
        raise DimensionError(f"target {target_index} out of range for logits {logits.shape}")
    log_probs = log_softmax(logits.data.astype(np.float64))
    loss = np.asarray(-log_probs[target_index]).astype(logits.dtype)

    def _backward(grad):
        delta = np.exp(log_probs)
        delta[target_index] -= 1.0
        return (grad * delta,)

    return Tensor.from_op(loss, (logits,), _backward)


def loss_mse(pred: Tensor, target: TensorLike) -> Tensor:
    target = ensure_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mse shapes differ: {pred.shape} vs {target.shape}")
    diff = pred.data.astype(np.float64) - target.data.astype(np.float64)
    loss = np.asarray(np.mean(diff * diff)).astype(pred.dtype)

    def _backward(grad):
        grad_pred = grad * 2.0 * diff / diff.size
        return grad_pred, -grad_pred

    return Tensor.from_op(loss, (pred, target), _backward)


def loss_bce(pred: Tensor, target: TensorLike, clamp: float = BCE_CLAMP) -> Tensor:
    """Mean binary cross-entropy of probabilities against a {0,1} target.

    Probabilities are clamped to [clamp, 1 - clamp]; the gradient is the
    formula's derivative at the clamped value.
    """
    target = ensure_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"bce shapes differ: {pred.shape} vs {target.shape}")
    labels = target.data.astype(np.float64)
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise InvalidInputError("bce target must contain only 0 and 1")
    prob = np.clip(pred.data.astype(np.float64), clamp, 1.0 - clamp)
    terms = labels * np.log(prob) + (1.0 - labels) * np.log1p(-prob)
    loss = np.asarray(-np.mean(terms)).astype(pred.dtype)

    def _backward(grad):
        return grad * (prob - labels) / (prob * (1.0 - prob)) / prob.size, None

    return Tensor.from_op(loss, (pred, target), _backward)


def signed_sqrt(x: Tensor) -> Tensor:
    magnitude = np.abs(x.data)
    out = np.sign(x.data) * np.sqrt(magnitude)
    return Tensor.from_op(out, (x,), lambda grad: (grad * 0.5 / np.sqrt(magnitude + 1e-8),))


def l2_normalize(x: Tensor, epsilon: float = 1e-12) -> Tensor:
    norm = max(float(np.sqrt(np.sum(x.data.astype(np.float64) ** 2))), epsilon)
    out = (x.data / norm).astype(x.dtype)

    def _backward(grad):
        return ((grad - out * np.sum(grad * out)) / norm,)

    return Tensor.from_op(out, (x,), _backward)


def sum_pool(x: Tensor, window: int) -> Tensor:
    """Sum consecutive, non-overlapping windows of a vector."""
    if x.ndim != 1 or x.shape[0] % window:
        raise DimensionError(f"length {x.shape} is not a multiple of window {window}")
    out = x.data.reshape(-1, window).sum(axis=1)
    return Tensor.from_op(out, (x,), lambda grad: (np.repeat(grad, window),))


def conv3d_transpose(
    x: Tensor,
    kernel: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    if x.ndim != 4:
        raise DimensionError(f"conv3d_transpose expects (C,D,H,W) input, got {x.shape}")
    return conv_transpose(x, kernel, bias, stride, padding)

"""Small reverse-mode tensor engine used by the reconstruction network."""

from autodiff.conv_lstm import ConvLstmState, ConvLstmWeights, conv_lstm_step, conv_lstm_unroll
from autodiff.gradcheck import grad_check
from autodiff.ops import (
    activate,
    conv2d,
    conv3d_transpose,
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
)
from autodiff.tensor import Tensor, backward, concat, gradients, no_grad, stack

__all__ = [
    "ConvLstmState",
    "ConvLstmWeights",
    "Tensor",
    "activate",
    "backward",
    "concat",
    "conv2d",
    "conv3d_transpose",
    "conv_lstm_step",
    "conv_lstm_unroll",
    "conv_transpose",
    "cross_entropy",
    "dense",
    "grad_check",
    "gradients",
    "l2_normalize",
    "layer_norm",
    "loss_bce",
    "loss_mse",
    "no_grad",
    "signed_sqrt",
    "softmax",
    "stack",
    "sum_pool",
]

from .functional import batch_norm, conv2d, conv2d_transpose, instance_norm
from .optim import Adam, AdamState, adam_step
from .tensor import (Tensor, add, clamp, concat_channels, leaky_relu, log, mean, mul,
                     neg, permute, relu, reshape, sigmoid, tabs, tanh, tsum)

__all__ = [
    "Adam", "AdamState", "Tensor", "adam_step", "add", "batch_norm", "clamp",
    "concat_channels", "conv2d", "conv2d_transpose", "instance_norm", "leaky_relu",
    "log", "mean", "mul", "neg", "permute", "relu", "reshape", "sigmoid", "tabs",
    "tanh", "tsum",
]

"""Dense NHWC tensors and a reverse-mode tape with differentiable VJPs."""

from .io import decode_tensor, encode_tensor, read_tensor, write_tensor
from .ops import (
    batch_norm,
    binary_cross_entropy_with_logits,
    concat_channels,
    constant,
    conv2d,
    l2_norm,
    linear,
    mean,
    pointwise,
    relu,
    reshape,
    sigmoid,
    softplus,
    split_channels,
    sum_all,
    tanh,
)
from .tape import (
    Function,
    Tape,
    Variable,
    backward,
    current_tape,
    grad,
    is_recording,
    no_grad,
    recording,
    vjp,
)
from .tensor import as_kernel, as_tensor, channel_vector, dirac_kernel, scaled_normal

__all__ = [
    "Function",
    "Tape",
    "Variable",
    "as_kernel",
    "as_tensor",
    "backward",
    "batch_norm",
    "binary_cross_entropy_with_logits",
    "channel_vector",
    "concat_channels",
    "constant",
    "conv2d",
    "current_tape",
    "decode_tensor",
    "dirac_kernel",
    "encode_tensor",
    "grad",
    "is_recording",
    "l2_norm",
    "linear",
    "mean",
    "no_grad",
    "pointwise",
    "read_tensor",
    "recording",
    "relu",
    "reshape",
    "scaled_normal",
    "sigmoid",
    "softplus",
    "split_channels",
    "sum_all",
    "tanh",
    "vjp",
    "write_tensor",
]

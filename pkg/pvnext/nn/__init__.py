from .autodiff import (
    Tensor,
    add,
    concat,
    linear,
    maxpool,
    mean,
    no_grad,
    relu,
    reshape,
    softmax_cross_entropy,
    sub,
    take,
)
from .layers import LinearLayer, MlpBlock, Module, forward_linear
from .optim import Sgd, SgdSchedule, sgd_step

__all__ = [
    "LinearLayer",
    "MlpBlock",
    "Module",
    "Sgd",
    "SgdSchedule",
    "Tensor",
    "add",
    "concat",
    "forward_linear",
    "linear",
    "maxpool",
    "mean",
    "no_grad",
    "relu",
    "reshape",
    "sgd_step",
    "softmax_cross_entropy",
    "sub",
    "take",
]

from .core import (
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    add,
    broadcast_to,
    embedding_lookup,
    getitem,
    layer_norm,
    matmul,
    mean,
    mse,
    mul,
    neg,
    relu,
    reshape,
    sigmoid,
    softmax,
    sub,
    tensor_sum,
    tanh,
    transpose,
)
from .init import he_init
from .optim import Adam

__all__ = [
    "Adam",
    "NonFiniteError",
    "ShapeError",
    "Tape",
    "Tensor",
    "add",
    "broadcast_to",
    "embedding_lookup",
    "getitem",
    "he_init",
    "layer_norm",
    "matmul",
    "mean",
    "mse",
    "mul",
    "neg",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "sub",
    "tanh",
    "tensor_sum",
    "transpose",
]

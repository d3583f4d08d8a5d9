"""Weight initialization."""

from __future__ import annotations

import numpy as np

from ..rng import Rng
from .core import Tensor


def he_init(shape, rng: Rng, dtype=np.float64) -> Tensor:
    """He-normal weights for matrices, zeros for bias vectors.

    Weight matrices are stored ``(fan_in, fan_out)`` and applied as
    ``x @ W``, so fan-in is the last-but-one extent.  Samples are drawn
    from N(0, 2/fan_in).
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0:
        raise ValueError("he_init requires a non-scalar shape")
    if len(shape) == 1:
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)
    fan_in = shape[-2]
    if fan_in == 0:
        raise ValueError(f"zero fan-in in shape {shape}")
    std = np.sqrt(2.0 / fan_in)
    data = rng.normal(0.0, std, size=shape).astype(dtype)
    return Tensor(data, requires_grad=True)

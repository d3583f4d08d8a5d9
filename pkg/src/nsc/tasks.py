"""Shared task container consumed by training and evaluation drivers.

A task is one program (mined, synthetic, or benchmark) reduced to its raw
input-output arrays.  Inputs are stored at native arity; padding to the
covering width happens at the point of use, because each initialization
method pads differently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Task:
    name: str
    source: str  # program text; empty for purely synthetic function tasks
    arity: int
    train_x: np.ndarray  # (n_train, arity)
    train_y: np.ndarray  # (n_train, n_outputs)
    test_x: np.ndarray
    test_y: np.ndarray
    pad_sampler: object = field(default=None, repr=False)  # (rng, shape) -> array

    def __post_init__(self):
        for x, y in ((self.train_x, self.train_y), (self.test_x, self.test_y)):
            if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
                raise ValueError(f"malformed task arrays for {self.name!r}")
            if x.shape[1] != self.arity:
                raise ValueError(f"task {self.name!r}: arity {self.arity} != inputs {x.shape[1]}")

    @property
    def n_outputs(self) -> int:
        return self.train_y.shape[1]

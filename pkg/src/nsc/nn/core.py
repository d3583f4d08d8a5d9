"""Reverse-mode automatic differentiation over dense numpy tensors.

Operations executed inside a ``with Tape():`` block are recorded in execution
order (which is a topological order of the graph); ``Tape.backward`` walks the
record once in reverse and returns a gradient map for every watched leaf.
Outside a tape, the same functions compute plain numpy results, which is the
inference path.

Float64 is the default dtype; float32 graphs are supported for the
precision-downcasting study only.
"""

from __future__ import annotations

import threading

import numpy as np

_FLOAT_DTYPES = (np.float32, np.float64)


class ShapeError(ValueError):
    """Raised when operand shapes do not conform; names both shapes."""


class NonFiniteError(FloatingPointError):
    """Raised in strict-finiteness mode when an op consumes NaN/Inf."""


_STATE = threading.local()


def _active_tape():
    return getattr(_STATE, "tape", None)


class Tensor:
    """Dense real array plus autodiff bookkeeping."""

    __slots__ = ("data", "requires_grad", "_parents", "_grad_fn", "_tape_index")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self._parents = None
        self._grad_fn = None
        self._tape_index = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def is_leaf(self) -> bool:
        return self._grad_fn is None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # operator sugar
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other, self.dtype))

    def __rmul__(self, other):
        return mul(_as_tensor(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other, self.dtype))

    def __getitem__(self, idx):
        return getitem(self, idx)


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


class Tape:
    """Execution-ordered operation record for one backward pass."""

    def __init__(self, strict_finite: bool = False):
        self.nodes: list[Tensor] = []
        self.leaves: list[Tensor] = []
        self._leaf_ids: set[int] = set()
        self.strict_finite = strict_finite
        self._prev = None

    def __enter__(self):
        self._prev = _active_tape()
        _STATE.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _STATE.tape = self._prev
        return False

    def _record(self, out: Tensor, parents, grad_fn):
        out._parents = parents
        out._grad_fn = grad_fn
        out._tape_index = len(self.nodes)
        self.nodes.append(out)
        for p in parents:
            if p.requires_grad and p.is_leaf() and id(p) not in self._leaf_ids:
                self._leaf_ids.add(id(p))
                self.leaves.append(p)

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Backpropagate from a scalar loss.

        Returns a map from every watched ``requires_grad`` leaf to its
        gradient (zeros when the leaf does not reach the loss).  Frozen
        leaves (``requires_grad=False``) never appear in the map.
        """
        if loss.data.size != 1:
            raise ShapeError(f"loss must be scalar, got shape {loss.data.shape}")
        if loss._tape_index is None:
            raise ValueError("loss was not recorded on this tape")

        pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaf_grads: dict[int, np.ndarray] = {}
        for node in reversed(self.nodes[: loss._tape_index + 1]):
            gout = pending.pop(id(node), None)
            if gout is None:
                continue
            for parent, grad in zip(node._parents, node._grad_fn(gout)):
                if grad is None or not parent.requires_grad:
                    continue
                bucket = leaf_grads if parent.is_leaf() else pending
                prev = bucket.get(id(parent))
                bucket[id(parent)] = grad if prev is None else prev + grad
        return {
            leaf: leaf_grads.get(id(leaf), np.zeros_like(leaf.data))
            for leaf in self.leaves
        }


def _make(out_data, parents, grad_fn) -> Tensor:
    needs_grad = any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=needs_grad)
    tape = _active_tape()
    if tape is not None and needs_grad:
        if tape.strict_finite:
            for p in parents:
                if not np.all(np.isfinite(p.data)):
                    raise NonFiniteError("non-finite value fed to a recorded op")
        tape._record(out, parents, grad_fn)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to `shape` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul requires ndim >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not contract")
    try:
        out = a.data @ b.data
    except ValueError:
        raise ShapeError(f"matmul: batch dims of {a.shape} and {b.shape} do not broadcast") from None

    def grad_fn(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _make(out, (a, b), grad_fn)


# ---------------------------------------------------------------------------
# activations and normalization


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    s = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    s = s.astype(d.dtype, copy=False)
    return _make(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _make(t, (x,), lambda g: (g * (1.0 - t * t),))


def relu(x: Tensor) -> Tensor:
    d = x.data
    return _make(np.maximum(d, 0.0), (x,), lambda g: (g * (d > 0),))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / np.sum(e, axis=axis, keepdims=True)

    def grad_fn(g):
        inner = np.sum(g * s, axis=axis, keepdims=True)
        return ((g - inner) * s,)

    return _make(s, (x,), grad_fn)


def layer_norm(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize the last axis to zero mean / unit variance (no affine)."""
    mu = np.mean(x.data, axis=-1, keepdims=True)
    var = np.var(x.data, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv

    def grad_fn(g):
        n = x.data.shape[-1]
        gm = np.mean(g, axis=-1, keepdims=True)
        gx = np.mean(g * xhat, axis=-1, keepdims=True)
        return (inv * (g - gm - xhat * gx),)

    _ = grad_fn  # closure holds xhat/inv for the backward pass
    return _make(xhat, (x,), grad_fn)


# ---------------------------------------------------------------------------
# lookups, reductions, losses


def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise TypeError("embedding ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding id out of range [0, {table.shape[0]})")
    out = table.data[ids]

    def grad_fn(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _make(out, (table,), grad_fn)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeError(f"mse: shapes {pred.shape} and {target.shape} differ")
    diff = pred.data - target.data
    out = np.mean(diff * diff) if diff.size else np.asarray(0.0, dtype=pred.dtype)

    def grad_fn(g):
        scale = g * 2.0 / max(diff.size, 1)
        return (scale * diff, -scale * diff)

    return _make(out, (pred, target), grad_fn)


def tensor_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(out, (x,), grad_fn)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.mean(x.data, axis=axis, keepdims=keepdims)
    count = x.data.size if axis is None else np.prod(
        [x.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g / count, x.shape).copy(),)
        gg = g
        if not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            for a in sorted(a % x.ndim for a in axes):
                gg = np.expand_dims(gg, a)
        return (np.broadcast_to(gg / count, x.shape).copy(),)

    return _make(out, (x,), grad_fn)


# ---------------------------------------------------------------------------
# structural ops


def reshape(x: Tensor, shape) -> Tensor:
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return _make(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),))


def getitem(x: Tensor, idx) -> Tensor:
    out = x.data[idx]

    def grad_fn(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        return (gx,)

    return _make(out, (x,), grad_fn)


def broadcast_to(x: Tensor, shape) -> Tensor:
    try:
        out = np.broadcast_to(x.data, shape)
    except ValueError:
        raise ShapeError(f"broadcast_to: cannot broadcast {x.shape} to {tuple(shape)}") from None
    return _make(out.copy(), (x,), lambda g: (_unbroadcast(g, x.shape),))

"""The covering architecture and everything that manipulates its weights.

A covering network is a 9-input MLP with two 4-neuron sigmoid hidden layers
and one linear output (65 parameters).  Every initialization method in this
project emits a flat parameter vector for this topology; this module owns the
vector layout, input padding, output-count adaptation, input pruning, and the
shared finetuning loop.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .nn import Adam, Tape, Tensor
from .rng import Rng


@dataclass(frozen=True)
class CoveringTopology:
    """Layer extents of the covering MLP, input first."""

    layer_sizes: tuple[int, ...] = (9, 4, 4, 1)

    @property
    def arity(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def layer_shapes(self) -> list[tuple[int, int]]:
        sizes = self.layer_sizes
        return [(sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]

    def param_count(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes())


COVERING = CoveringTopology()
PARAM_COUNT = COVERING.param_count()  # 65


class PaddingMode(enum.Enum):
    RANDOM = "random"
    ZERO = "zero"


class OutputStrategy(enum.Enum):
    GROW = "grow"
    REINITIALIZE = "reinitialize"
    CLONE = "clone"


class MlpSurrogate:
    """Concrete network: per-layer (weights, bias) numpy arrays.

    Hidden layers apply sigmoid; the output layer is linear.  Weights are
    stored (fan_in, fan_out) and applied as ``x @ W + b``.
    """

    def __init__(self, layers: list[tuple[np.ndarray, np.ndarray]]):
        for w, b in layers:
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise nn.ShapeError(f"bad layer shapes {w.shape} / {b.shape}")
        self.layers = [(np.array(w, dtype=np.float64), np.array(b, dtype=np.float64))
                       for w, b in layers]

    @property
    def arity(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def n_outputs(self) -> int:
        return self.layers[-1][0].shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=np.float64)
        for w, b in self.layers[:-1]:
            z = h @ w + b
            h = 1.0 / (1.0 + np.exp(-z))
        w, b = self.layers[-1]
        return h @ w + b

    def copy(self) -> "MlpSurrogate":
        return MlpSurrogate([(w.copy(), b.copy()) for w, b in self.layers])


def interpret(params: np.ndarray, topology: CoveringTopology = COVERING) -> MlpSurrogate:
    """Deterministic bijection from a flat vector onto the topology.

    Layout is layer-major, weights (row-major) then bias per layer.
    """
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    if params.shape[0] != topology.param_count():
        raise ValueError(
            f"parameter vector has length {params.shape[0]}, "
            f"expected {topology.param_count()}"
        )
    layers = []
    off = 0
    for fan_in, fan_out in topology.layer_shapes():
        w = params[off:off + fan_in * fan_out].reshape(fan_in, fan_out)
        off += fan_in * fan_out
        b = params[off:off + fan_out]
        off += fan_out
        layers.append((w, b))
    return MlpSurrogate(layers)


def flatten(net: MlpSurrogate) -> np.ndarray:
    """Inverse of interpret: flat vector in the shared layout."""
    return np.concatenate([np.concatenate([w.reshape(-1), b]) for w, b in net.layers])


def interpret_tensors(params: Tensor, topology: CoveringTopology = COVERING
                      ) -> list[tuple[Tensor, Tensor]]:
    """Slice a (..., d) parameter tensor into differentiable layer tensors.

    Leading batch dims are preserved, so a (P, d) hypernetwork output becomes
    per-program weight stacks suitable for batched matmul.
    """
    if params.shape[-1] != topology.param_count():
        raise ValueError(f"last dim {params.shape[-1]} != {topology.param_count()}")
    batch = params.shape[:-1]
    lead = (slice(None),) * len(batch)
    layers = []
    off = 0
    for fan_in, fan_out in topology.layer_shapes():
        w = nn.reshape(params[lead + (slice(off, off + fan_in * fan_out),)],
                       batch + (fan_in, fan_out))
        off += fan_in * fan_out
        b = params[lead + (slice(off, off + fan_out),)]
        off += fan_out
        layers.append((w, b))
    return layers


def forward_tensors(x: Tensor, layers: list[tuple[Tensor, Tensor]]) -> Tensor:
    """Differentiable covering-network forward pass (batched weights allowed)."""
    h = x
    for i, (w, b) in enumerate(layers):
        bias = b
        if w.ndim > 2:
            # (P, fan_out) bias under a (P, N, fan_out) activation
            bias = nn.reshape(b, b.shape[:-1] + (1,) + b.shape[-1:])
        z = nn.add(nn.matmul(h, w), bias)
        h = nn.sigmoid(z) if i < len(layers) - 1 else z
    return h


# ---------------------------------------------------------------------------
# input padding / output adaptation / input pruning


def pad_input(raw, mode: PaddingMode, rng: Rng | None = None, width: int = 9,
              sampler=None) -> np.ndarray:
    """Pad one input vector of arity n <= width out to `width` entries."""
    raw = np.asarray(raw, dtype=np.float64).reshape(-1)
    return pad_batch(raw[None, :], mode, rng, width=width, sampler=sampler)[0]


def pad_batch(x, mode: PaddingMode, rng: Rng | None = None, width: int = 9,
              sampler=None) -> np.ndarray:
    """Pad (rows, n) inputs to (rows, width).

    ZERO fills the excess entries with zeroes; RANDOM draws them from the
    program's input distribution (uniform on [-1, 1] unless a sampler is
    given).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise nn.ShapeError(f"pad_batch expects 2-d input, got shape {x.shape}")
    rows, arity = x.shape
    if arity > width:
        raise ValueError(f"arity {arity} exceeds covering width {width}")
    if arity == width:
        return x.copy()
    extra = (rows, width - arity)
    if mode is PaddingMode.ZERO:
        pad = np.zeros(extra)
    else:
        if rng is None:
            raise ValueError("RANDOM padding requires an rng")
        pad = sampler(rng, extra) if sampler is not None else rng.uniform(-1.0, 1.0, extra)
    return np.concatenate([x, pad], axis=1)


def adapt_outputs(params: np.ndarray, k: int, strategy: OutputStrategy, rng: Rng,
                  topology: CoveringTopology = COVERING) -> MlpSurrogate:
    """Turn a single-output parameter vector into a k-output network."""
    if k < 1:
        raise ValueError("target output count must be >= 1")
    net = interpret(params, topology)
    w, b = net.layers[-1]
    fan_in = w.shape[0]
    if strategy is OutputStrategy.CLONE:
        new_w = np.repeat(w[:, :1], k, axis=1)
        new_b = np.repeat(b[:1], k)
    elif strategy is OutputStrategy.GROW:
        from .nn.init import he_init
        if k == 1:
            new_w, new_b = w[:, :1].copy(), b[:1].copy()
        else:
            extra = he_init((fan_in, k - 1), rng).data
            new_w = np.concatenate([w[:, :1], extra], axis=1)
            new_b = np.concatenate([b[:1], np.zeros(k - 1)])
    elif strategy is OutputStrategy.REINITIALIZE:
        from .nn.init import he_init
        new_w = he_init((fan_in, k), rng).data
        new_b = np.zeros(k)
    else:  # pragma: no cover
        raise ValueError(strategy)
    return MlpSurrogate(net.layers[:-1] + [(new_w, new_b)])


def prune_inputs(net: MlpSurrogate, active_arity: int) -> MlpSurrogate:
    """Drop first-layer weights for inputs >= active_arity.

    Exact by linearity: a network finetuned with zero padding computes the
    same outputs after the zero-fed weights are removed.
    """
    if active_arity > net.arity:
        raise ValueError(f"active arity {active_arity} exceeds net arity {net.arity}")
    w0, b0 = net.layers[0]
    return MlpSurrogate([(w0[:active_arity, :], b0)] + net.layers[1:])


# ---------------------------------------------------------------------------
# finetuning


@dataclass
class FinetuneConfig:
    learning_rate: float = 0.01
    epochs: int = 5000
    eval_every: int = 3
    batch_size: int | None = None  # None = full batch
    seed: int = 0
    stop_at_test_loss: float | None = None  # early exit once test loss reaches this

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class Splits:
    """Train/val/test input-output arrays (inputs already padded/sized)."""

    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray

    @property
    def has_val(self) -> bool:
        return self.val_x.shape[0] > 0

    @property
    def has_train(self) -> bool:
        return self.train_x.shape[0] > 0


@dataclass
class FinetuneTrace:
    logged_epochs: list[int] = field(default_factory=list)
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)  # NaN when no val set
    test_losses: list[float] = field(default_factory=list)
    best_val_epoch: int = 0
    reported_test_loss: float = math.nan
    final_params: np.ndarray | None = None
    aborted: bool = False
    diagnostic: str = ""


def reported_test_loss(val_epochs, val_losses, test_epochs, test_losses
                       ) -> tuple[int, float]:
    """Apply the best-validation reporting rule.

    Returns (best_val_epoch, test loss at the logged test epoch nearest it).
    With no usable validation losses the rule degrades to the final epoch.
    Ties break toward the earlier epoch in both steps.
    """
    test_epochs = list(test_epochs)
    test_losses = list(test_losses)
    usable = [(e, v) for e, v in zip(val_epochs, val_losses) if not math.isnan(v)]
    if not usable:
        return test_epochs[-1], test_losses[-1]
    best_epoch = min(usable, key=lambda ev: (ev[1], ev[0]))[0]
    nearest = min(test_epochs, key=lambda e: (abs(e - best_epoch), e))
    return best_epoch, test_losses[test_epochs.index(nearest)]


def _np_loss(net_layers, x, y) -> float:
    if x.shape[0] == 0:
        return math.nan
    h = x
    for w, b in net_layers[:-1]:
        h = 1.0 / (1.0 + np.exp(-(h @ w.data + b.data)))
    w, b = net_layers[-1]
    pred = h @ w.data + b.data
    d = pred - y
    return float(np.mean(d * d))


def finetune(init: np.ndarray, data: Splits, cfg: FinetuneConfig,
             topology: CoveringTopology = COVERING) -> FinetuneTrace:
    """Adam/MSE training of a covering network from a flat init vector.

    Losses are logged before training, every ``eval_every`` epochs, and at
    the final epoch.  The reported test loss follows the best-validation
    rule.  A non-finite training loss aborts the trial with a diagnostic so
    the caller can discard it.
    """
    net = interpret(init, topology)
    layers = [(Tensor(w, requires_grad=True), Tensor(b, requires_grad=True))
              for w, b in net.layers]
    params = [t for pair in layers for t in pair]
    opt = Adam(params, lr=cfg.learning_rate)
    rng = Rng(cfg.seed)
    trace = FinetuneTrace()

    def log(epoch: int) -> bool:
        """Record losses; True when the early-stop target has been reached."""
        trace.logged_epochs.append(epoch)
        trace.train_losses.append(_np_loss(layers, data.train_x, data.train_y))
        trace.val_losses.append(
            _np_loss(layers, data.val_x, data.val_y) if data.has_val else math.nan)
        test = _np_loss(layers, data.test_x, data.test_y)
        trace.test_losses.append(test)
        return (cfg.stop_at_test_loss is not None
                and not math.isnan(test) and test <= cfg.stop_at_test_loss)

    stop = log(0)
    n_train = data.train_x.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        if stop:
            break
        if n_train == 0:
            break
        if cfg.batch_size is None or cfg.batch_size >= n_train:
            batches = [slice(None)]
        else:
            order = rng.child("epoch", epoch).permutation(n_train)
            batches = [order[i:i + cfg.batch_size]
                       for i in range(0, n_train, cfg.batch_size)]
        step_loss = 0.0
        for batch in batches:
            with Tape() as tape:
                pred = forward_tensors(Tensor(data.train_x[batch]), layers)
                loss = nn.mse(pred, Tensor(data.train_y[batch]))
                grads = tape.backward(loss)
            step_loss = loss.item()
            if not math.isfinite(step_loss):
                trace.aborted = True
                trace.diagnostic = f"non-finite training loss at epoch {epoch}"
                trace.final_params = flatten(_materialize(layers))
                trace.best_val_epoch, trace.reported_test_loss = (0, math.nan)
                return trace
            opt.step(grads)
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            stop = log(epoch)

    trace.final_params = flatten(_materialize(layers))
    trace.best_val_epoch, trace.reported_test_loss = reported_test_loss(
        trace.logged_epochs, trace.val_losses, trace.logged_epochs, trace.test_losses)
    return trace


def _materialize(layers) -> MlpSurrogate:
    return MlpSurrogate([(w.data, b.data) for w, b in layers])

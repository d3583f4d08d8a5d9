"""Non-hypernetwork initialization methods: random (He), MAML, pretrained.

All three emit a flat covering-architecture parameter vector accepted by
``surrogate.interpret`` and ``surrogate.finetune``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .nn import Tape, Tensor
from .nn.init import he_init
from .rng import Rng
from .surrogate import (
    COVERING,
    CoveringTopology,
    MlpSurrogate,
    PaddingMode,
    flatten,
    forward_tensors,
    interpret,
    pad_batch,
)
from .tasks import Task


def random_init(topology: CoveringTopology = COVERING, seed=0) -> np.ndarray:
    """He-initialized weights, zero biases, flattened."""
    rng = seed if isinstance(seed, Rng) else Rng(int(seed))
    layers = []
    for i, (fan_in, fan_out) in enumerate(topology.layer_shapes()):
        w = he_init((fan_in, fan_out), rng.child("w", i)).data
        layers.append((w, np.zeros(fan_out)))
    return flatten(MlpSurrogate(layers))


@dataclass
class MamlConfig:
    meta_batch: int = 32
    input_batch: int = 1024
    epochs: int = 70_000  # paper-scale; CLI desk default overrides this
    inner_lr: float = 0.2
    outer_lr: float = 0.001
    inner_steps: int = 3
    padding: PaddingMode = PaddingMode.ZERO
    seed: int = 0

    def __post_init__(self):
        if self.inner_lr < 0 or self.outer_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.inner_steps < 0:
            raise ValueError("inner_steps must be >= 0")


@dataclass
class PretrainConfig:
    program_batch: int = 32
    input_batch: int = 1024
    learning_rate: float = 1e-5
    epochs: int = 1500
    padding: PaddingMode = PaddingMode.RANDOM
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 0:
            raise ValueError("invalid pretrain config")


@dataclass
class TrainResult:
    params: np.ndarray
    epoch_losses: list[float] = field(default_factory=list)
    # MAML only: loss before / after inner adaptation, per meta-step
    pre_losses: list[float] = field(default_factory=list)
    post_losses: list[float] = field(default_factory=list)
    skipped_batches: int = 0


class TrainingDiverged(RuntimeError):
    """Three consecutive non-finite batch losses."""


def _support_query(task: Task) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic halves of the training rows.

    Query rows must not come from the task's test split, which is reserved
    for evaluation.
    """
    half = task.train_x.shape[0] // 2
    return (task.train_x[:half], task.train_y[:half],
            task.train_x[half:], task.train_y[half:])


def _sample_rows(x, y, count, rng: Rng):
    n = x.shape[0]
    if count >= n:
        return x, y
    idx = rng.choice(n, size=count, replace=False)
    return x[idx], y[idx]


def _pad(x, mode: PaddingMode, rng: Rng, task: Task, width: int):
    return pad_batch(x, mode, rng, width=width, sampler=task.pad_sampler)


def _stack_layers(theta: list[tuple[np.ndarray, np.ndarray]], t: int):
    return [(np.repeat(w[None], t, axis=0), np.repeat(b[None], t, axis=0))
            for w, b in theta]


def _batched_loss_graph(layer_arrays, xs, ys, reduce_kind: str):
    """Forward a (T, N, width) batch through per-task weight stacks.

    reduce_kind "sum" yields per-task gradients unscaled (inner loop);
    "mean" yields the across-task average (meta loss).
    """
    leaves = [(Tensor(w, requires_grad=True), Tensor(b, requires_grad=True))
              for w, b in layer_arrays]
    pred = forward_tensors(Tensor(xs), leaves)
    sq = nn.mul(nn.sub(pred, Tensor(ys)), nn.sub(pred, Tensor(ys)))
    per_task = nn.mean(sq, axis=(1, 2))
    loss = nn.tensor_sum(per_task) if reduce_kind == "sum" else nn.mean(per_task)
    return leaves, per_task, loss


def _np_batched_loss(layer_arrays, xs, ys) -> float:
    h = xs
    for w, b in layer_arrays[:-1]:
        h = 1.0 / (1.0 + np.exp(-(h @ w + b[:, None, :])))
    w, b = layer_arrays[-1]
    pred = h @ w + b[:, None, :]
    return float(np.mean((pred - ys) ** 2))


def inner_adapt(params: np.ndarray, support_x: np.ndarray, support_y: np.ndarray,
                alpha: float, steps: int,
                topology: CoveringTopology = COVERING) -> np.ndarray:
    """Plain-SGD adaptation of a flat parameter vector on one task's support set."""
    theta = [(w.copy(), b.copy()) for w, b in interpret(params, topology).layers]
    for _ in range(steps):
        leaves = [(Tensor(w, requires_grad=True), Tensor(b, requires_grad=True))
                  for w, b in theta]
        with Tape() as tape:
            pred = forward_tensors(Tensor(support_x), leaves)
            loss = nn.mse(pred, Tensor(support_y))
            grads = tape.backward(loss)
        theta = [(w - alpha * grads[lw], b - alpha * grads[lb])
                 for (w, b), (lw, lb) in zip(theta, leaves)]
    return flatten(MlpSurrogate(theta))


def maml_train(tasks: list[Task], cfg: MamlConfig,
               topology: CoveringTopology = COVERING) -> TrainResult:
    """First-order MAML over a task corpus.

    Per meta-step: sample ``meta_batch`` tasks, adapt a copy of the shared
    initialization with ``inner_steps`` SGD steps at ``inner_lr`` on support
    rows, evaluate the query loss of the adapted parameters, and apply the
    task-averaged query gradient (taken at the adapted parameters) to the
    initialization with plain SGD at ``outer_lr``.
    """
    if not tasks:
        raise ValueError("empty task corpus")
    rng = Rng(cfg.seed)
    width = topology.arity
    theta = [(w, b) for w, b in interpret(random_init(topology, rng.child("init")),
                                          topology).layers]
    result = TrainResult(params=np.empty(0))
    nan_streak = 0

    for epoch in range(cfg.epochs):
        erng = rng.child("epoch", epoch)
        if len(tasks) >= cfg.meta_batch:
            picks = erng.child("tasks").choice(len(tasks), size=cfg.meta_batch, replace=False)
        else:
            picks = erng.child("tasks").choice(len(tasks), size=cfg.meta_batch, replace=True)
        batch = [tasks[i] for i in picks]

        sup_x, sup_y, qry_x, qry_y = [], [], [], []
        for slot, task in enumerate(batch):
            sx, sy, qx, qy = _support_query(task)
            trng = erng.child("rows", slot)
            sx, sy = _sample_rows(sx, sy, cfg.input_batch, trng.child("s"))
            qx, qy = _sample_rows(qx, qy, cfg.input_batch, trng.child("q"))
            sup_x.append(_pad(sx, cfg.padding, trng.child("ps"), task, width))
            sup_y.append(sy)
            qry_x.append(_pad(qx, cfg.padding, trng.child("pq"), task, width))
            qry_y.append(qy)
        # tasks in one meta-batch must share row counts to stack; sample_rows
        # guarantees this when every task has >= input_batch rows, otherwise
        # trim to the shortest
        n_s = min(x.shape[0] for x in sup_x)
        n_q = min(x.shape[0] for x in qry_x)
        sup = (np.stack([x[:n_s] for x in sup_x]), np.stack([y[:n_s] for y in sup_y]))
        qry = (np.stack([x[:n_q] for x in qry_x]), np.stack([y[:n_q] for y in qry_y]))

        before = [w.copy() for w, _ in theta]
        adapted = _stack_layers(theta, len(batch))
        pre_loss = _np_batched_loss(adapted, *qry)
        for _ in range(cfg.inner_steps):
            with Tape() as tape:
                leaves, _, loss = _batched_loss_graph(adapted, *sup, "sum")
                grads = tape.backward(loss)
            adapted = [(w - cfg.inner_lr * grads[lw], b - cfg.inner_lr * grads[lb])
                       for (w, b), (lw, lb) in zip(adapted, leaves)]

        with Tape() as tape:
            leaves, per_task, loss = _batched_loss_graph(adapted, *qry, "mean")
            grads = tape.backward(loss)
        post_loss = loss.item()
        assert all(np.array_equal(w, saved) for (w, _), saved in zip(theta, before)), \
            "inner loop mutated the shared initialization"

        if not math.isfinite(post_loss):
            result.skipped_batches += 1
            nan_streak += 1
            if nan_streak >= 3:
                raise TrainingDiverged(f"meta-loss non-finite at epoch {epoch}")
            continue
        nan_streak = 0
        theta = [(w - cfg.outer_lr * grads[lw].sum(axis=0),
                  b - cfg.outer_lr * grads[lb].sum(axis=0))
                 for (w, b), (lw, lb) in zip(theta, leaves)]
        result.pre_losses.append(pre_loss)
        result.post_losses.append(post_loss)
        result.epoch_losses.append(post_loss)

    result.params = flatten(MlpSurrogate(theta))
    return result


def pretrain(tasks: list[Task], cfg: PretrainConfig,
             topology: CoveringTopology = COVERING) -> TrainResult:
    """Train one covering network on the pooled input-output examples."""
    if not tasks:
        raise ValueError("empty task corpus")
    rng = Rng(cfg.seed)
    width = topology.arity
    init = random_init(topology, rng.child("init"))
    layers = [(Tensor(w, requires_grad=True), Tensor(b, requires_grad=True))
              for w, b in interpret(init, topology).layers]
    params = [t for pair in layers for t in pair]
    opt = nn.Adam(params, lr=cfg.learning_rate)
    result = TrainResult(params=np.empty(0))
    nan_streak = 0

    for epoch in range(cfg.epochs):
        erng = rng.child("epoch", epoch)
        order = erng.child("shuffle").permutation(len(tasks))
        epoch_losses = []
        for start in range(0, len(tasks), cfg.program_batch):
            batch = [tasks[i] for i in order[start:start + cfg.program_batch]]
            xs, ys = [], []
            for slot, task in enumerate(batch):
                trng = erng.child("rows", start + slot)
                x, y = _sample_rows(task.train_x, task.train_y, cfg.input_batch,
                                    trng.child("r"))
                xs.append(_pad(x, cfg.padding, trng.child("p"), task, width))
                ys.append(y)
            n = min(x.shape[0] for x in xs)
            bx = np.stack([x[:n] for x in xs])
            by = np.stack([y[:n] for y in ys])
            with Tape() as tape:
                leaves = _stack_layers_shared(layers, len(batch))
                pred = forward_tensors(Tensor(bx), leaves)
                sq = nn.mul(nn.sub(pred, Tensor(by)), nn.sub(pred, Tensor(by)))
                loss = nn.mean(nn.mean(sq, axis=(1, 2)))
                grads = tape.backward(loss)
            value = loss.item()
            if not math.isfinite(value):
                result.skipped_batches += 1
                nan_streak += 1
                if nan_streak >= 3:
                    raise TrainingDiverged(f"pooled loss non-finite at epoch {epoch}")
                continue
            nan_streak = 0
            opt.step(grads)
            epoch_losses.append(value)
        result.epoch_losses.append(float(np.mean(epoch_losses)) if epoch_losses else math.nan)

    result.params = flatten(MlpSurrogate([(w.data, b.data) for w, b in layers]))
    return result


def _stack_layers_shared(layers, t: int):
    """Broadcast shared weight tensors across a task batch, keeping gradients."""
    out = []
    for w, b in layers:
        out.append((nn.broadcast_to(w, (t,) + w.shape), nn.broadcast_to(b, (t,) + b.shape)))
    return out


# ---------------------------------------------------------------------------
# sine-family sanity tasks (the standard few-shot regression check)


def sine_tasks(count: int, rng: Rng, amplitude=(0.1, 5.0), phase=(0.0, math.pi),
               x_range=(-5.0, 5.0), points: int = 200) -> list[Task]:
    """Tasks of the form y = A * sin(x + phi) on a shared input range."""
    tasks = []
    for i in range(count):
        trng = rng.child("sine", i)
        amp = float(trng.child("A").uniform(*amplitude))
        phi = float(trng.child("phi").uniform(*phase))
        x = trng.child("x").uniform(x_range[0], x_range[1], size=(points, 1))
        y = amp * np.sin(x + phi)
        half = points // 2
        tasks.append(Task(
            name=f"sine-{i}", source="", arity=1,
            train_x=x[:half], train_y=y[:half],
            test_x=x[half:], test_y=y[half:],
        ))
    return tasks


def adaptation_check(params: np.ndarray, task: Task, inner_lr: float,
                     inner_steps: int, support_points: int, rng: Rng,
                     topology: CoveringTopology = COVERING) -> tuple[float, float]:
    """Query MSE before and after inner-loop adaptation on one held-out task."""
    sx, sy, qx, qy = _support_query(task)
    sx, sy = _sample_rows(sx, sy, support_points, rng.child("s"))
    sxp = pad_batch(sx, PaddingMode.ZERO, width=topology.arity)
    qxp = pad_batch(qx, PaddingMode.ZERO, width=topology.arity)
    before = interpret(params, topology)(qxp)
    pre = float(np.mean((before - qy) ** 2))
    adapted = inner_adapt(params, sxp, sy, inner_lr, inner_steps, topology)
    after = interpret(adapted, topology)(qxp)
    post = float(np.mean((after - qy) ** 2))
    return pre, post


def sine_sanity_experiment(seed: int = 33, meta_epochs: int = 5000,
                           held_out: int = 100, support_points: int = 10
                           ) -> tuple[int, int]:
    """Meta-train on sine tasks, then count held-out tasks where 3 inner
    steps on `support_points` support rows reduce the query MSE.

    The family is y = A*sin(x + phi) with A in [0.5, 2] and x in [-pi, pi];
    amplitudes below ~0.5 make the pre-adaptation loss so small that 10-point
    adaptation is pure noise, which tests nothing.
    """
    rng = Rng(100)
    amp, xr = (0.5, 2.0), (-math.pi, math.pi)
    train = sine_tasks(240, rng.child("train"), amplitude=amp, x_range=xr, points=64)
    held = sine_tasks(held_out, rng.child("held"), amplitude=amp, x_range=xr, points=64)
    cfg = MamlConfig(meta_batch=32, input_batch=support_points, epochs=meta_epochs,
                     seed=seed)
    result = maml_train(train, cfg)
    wins = 0
    for i, task in enumerate(held):
        pre, post = adaptation_check(result.params, task, cfg.inner_lr,
                                     cfg.inner_steps, support_points,
                                     Rng(200).child(i))
        wins += post < pre
    return wins, len(held)

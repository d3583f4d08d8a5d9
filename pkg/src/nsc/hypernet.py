"""The neural surrogate compiler: program text in, covering weights out.

A compact transformer encoder embeds the tokenized program; the hidden state
of the classification token is regressed through a single linear layer to the
65-dimensional covering parameter vector.  Training materializes a surrogate
per program in the batch, executes it on sampled input-output rows, and
backpropagates the MSE into the encoder and head only; generated surrogate
weights are ephemeral graph nodes and never optimizer state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .nn import Adam, Tape, Tensor
from .nn.init import he_init
from .rng import Rng
from .surrogate import (
    COVERING,
    CoveringTopology,
    PaddingMode,
    forward_tensors,
    interpret_tensors,
    pad_batch,
)
from .tasks import Task
from .tokenizer import Vocab, build_vocab, tokenize

NEG_MASK = -1e30  # additive attention mask; exp underflows to exactly zero


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 2
    hidden: int = 128
    heads: int = 2
    feed_forward: int = 512
    max_positions: int = 512

    def __post_init__(self):
        if self.hidden % self.heads != 0:
            raise ValueError("hidden size must be divisible by the head count")


@dataclass
class HypernetTrainConfig:
    program_batch: int = 32
    input_batch: int = 1024
    learning_rate: float = 5e-5
    epochs: int = 1500
    padding: PaddingMode = PaddingMode.RANDOM
    seed: int = 0
    vocab_size: int = 30_522

    def __post_init__(self):
        if min(self.program_batch, self.input_batch, self.epochs) < 1:
            raise ValueError("batch sizes and epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


class HypernetModel:
    """Tokenizer vocabulary + transformer encoder + linear parameter head."""

    def __init__(self, vocab: Vocab, config: EncoderConfig, rng: Rng,
                 topology: CoveringTopology = COVERING):
        self.vocab = vocab
        self.config = config
        self.topology = topology
        self.param_dim = topology.param_count()
        self._params: list[tuple[str, Tensor]] = []
        h, ff = config.hidden, config.feed_forward

        def reg(name, tensor):
            self._params.append((name, tensor))
            return tensor

        def normal(name, shape, scale=0.02):
            t = Tensor(rng.child(name).normal(0.0, scale, size=shape), requires_grad=True)
            return reg(name, t)

        def linear(name, fan_in, fan_out):
            w = reg(f"{name}.w", he_init((fan_in, fan_out), rng.child(name, "w")))
            b = reg(f"{name}.b", Tensor(np.zeros(fan_out), requires_grad=True))
            return w, b

        def ln(name):
            g = reg(f"{name}.g", Tensor(np.ones(h), requires_grad=True))
            b = reg(f"{name}.b", Tensor(np.zeros(h), requires_grad=True))
            return g, b

        self.tok_emb = normal("tok_emb", (len(vocab), h))
        self.pos_emb = normal("pos_emb", (config.max_positions, h))
        self.emb_ln = ln("emb_ln")
        self.blocks = []
        for i in range(config.layers):
            self.blocks.append({
                "q": linear(f"block{i}.q", h, h),
                "k": linear(f"block{i}.k", h, h),
                "v": linear(f"block{i}.v", h, h),
                "o": linear(f"block{i}.o", h, h),
                "ln1": ln(f"block{i}.ln1"),
                "ff1": linear(f"block{i}.ff1", h, ff),
                "ff2": linear(f"block{i}.ff2", ff, h),
                "ln2": ln(f"block{i}.ln2"),
            })
        self.head = linear("head", h, self.param_dim)

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self._params]

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self._params)

    # -- forward ----------------------------------------------------------

    def encode_ids(self, ids: np.ndarray, pad_mask: np.ndarray | None = None) -> Tensor:
        """CLS hidden states, shape (batch, hidden).

        `ids` is (batch, seq); `pad_mask` marks real tokens with 1.
        """
        if ids.ndim != 2:
            raise ValueError("ids must be (batch, seq)")
        if ids.max(initial=0) >= len(self.vocab):
            raise IndexError("token id out of vocabulary range")
        b, t = ids.shape
        cfg = self.config
        if t > cfg.max_positions:
            raise ValueError(f"sequence length {t} exceeds {cfg.max_positions}")
        dh = cfg.hidden // cfg.heads

        x = nn.add(nn.embedding_lookup(self.tok_emb, ids),
                   self.pos_emb[0:t])
        x = _affine_ln(x, self.emb_ln)

        if pad_mask is None:
            pad_mask = np.ones((b, t))
        add_mask = Tensor(np.repeat(
            np.where(pad_mask, 0.0, NEG_MASK)[:, None, :], cfg.heads, axis=0))

        for blk in self.blocks:
            q = _split_heads(_linear(x, blk["q"]), cfg.heads, dh)
            k = _split_heads(_linear(x, blk["k"]), cfg.heads, dh)
            v = _split_heads(_linear(x, blk["v"]), cfg.heads, dh)
            scores = nn.mul(nn.matmul(q, nn.transpose(k, (0, 2, 1))),
                            Tensor(1.0 / math.sqrt(dh)))
            attn = nn.softmax(nn.add(scores, add_mask), axis=-1)
            ctx = _merge_heads(nn.matmul(attn, v), b, cfg.heads, t, dh)
            x = _affine_ln(nn.add(x, _linear(ctx, blk["o"])), blk["ln1"])
            ff = _linear(nn.relu(_linear(x, blk["ff1"])), blk["ff2"])
            x = _affine_ln(nn.add(x, ff), blk["ln2"])
        return x[:, 0, :]

    def compile_ids(self, ids: np.ndarray, pad_mask: np.ndarray | None = None) -> Tensor:
        """Differentiable compile of a pre-tokenized batch to (batch, d)."""
        return _linear(self.encode_ids(ids, pad_mask), self.head)

    def compile(self, source: str) -> np.ndarray:
        """Compile one program's text to a flat covering parameter vector."""
        ids = tokenize(source, self.vocab, self.config.max_positions)
        return self.compile_ids(ids[None, :]).data[0]


def _linear(x, wb):
    w, b = wb
    return nn.add(nn.matmul(x, w), b)


def _affine_ln(x, gb):
    g, b = gb
    return nn.add(nn.mul(nn.layer_norm(x), g), b)


def _split_heads(x, heads, dh):
    b, t, h = x.shape
    x = nn.reshape(x, (b, t, heads, dh))
    x = nn.transpose(x, (0, 2, 1, 3))
    return nn.reshape(x, (b * heads, t, dh))


def _merge_heads(x, b, heads, t, dh):
    x = nn.reshape(x, (b, heads, t, dh))
    x = nn.transpose(x, (0, 2, 1, 3))
    return nn.reshape(x, (b, t, heads * dh))


@dataclass
class HypernetTrainResult:
    model: HypernetModel
    epoch_losses: list[float] = field(default_factory=list)
    skipped_batches: int = 0


class TrainingDiverged(RuntimeError):
    pass


def pad_id_batch(seqs: list[np.ndarray], pad_id: int) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad id sequences to a common length; returns (ids, real-token mask)."""
    t = max(len(s) for s in seqs)
    ids = np.full((len(seqs), t), pad_id, dtype=np.int64)
    mask = np.zeros((len(seqs), t))
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = 1.0
    return ids, mask


def train(tasks: list[Task], cfg: HypernetTrainConfig,
          encoder: EncoderConfig | None = None,
          model: HypernetModel | None = None,
          topology: CoveringTopology = COVERING) -> HypernetTrainResult:
    """Train a hypernetwork on a program corpus.

    Every task must carry program text and train-split rows.  Each step
    compiles a batch of programs, runs the materialized surrogates on
    random-padded input rows, and averages the per-program MSE (inputs
    first, then programs).
    """
    if not tasks:
        raise ValueError("empty task corpus")
    rng = Rng(cfg.seed)
    if model is None:
        vocab = build_vocab((t.source for t in tasks), cfg.vocab_size)
        model = HypernetModel(vocab, encoder or EncoderConfig(), rng.child("model"),
                              topology)
    token_ids = [tokenize(t.source, model.vocab, model.config.max_positions)
                 for t in tasks]
    opt = Adam(model.parameters(), lr=cfg.learning_rate)
    result = HypernetTrainResult(model=model)
    width = topology.arity
    nan_streak = 0

    for epoch in range(cfg.epochs):
        erng = rng.child("epoch", epoch)
        order = erng.child("shuffle").permutation(len(tasks))
        losses = []
        for start in range(0, len(tasks), cfg.program_batch):
            picks = order[start:start + cfg.program_batch]
            xs, ys = [], []
            for slot, idx in enumerate(picks):
                task = tasks[idx]
                trng = erng.child("rows", start + slot)
                x, y = task.train_x, task.train_y
                if cfg.input_batch < x.shape[0]:
                    sel = trng.child("r").choice(x.shape[0], size=cfg.input_batch,
                                                 replace=False)
                    x, y = x[sel], y[sel]
                xs.append(pad_batch(x, cfg.padding, trng.child("p"), width=width,
                                    sampler=task.pad_sampler))
                ys.append(y)
            n = min(x.shape[0] for x in xs)
            bx = np.stack([x[:n] for x in xs])
            by = np.stack([y[:n] for y in ys])
            ids, mask = pad_id_batch([token_ids[i] for i in picks], model.vocab.pad_id)

            with Tape() as tape:
                pvec = model.compile_ids(ids, mask)
                layers = interpret_tensors(pvec, topology)
                pred = forward_tensors(Tensor(bx), layers)
                err = nn.sub(pred, Tensor(by))
                per_program = nn.mean(nn.mul(err, err), axis=(1, 2))
                loss = nn.mean(per_program)
                grads = tape.backward(loss)
            value = loss.item()
            if not math.isfinite(value):
                result.skipped_batches += 1
                nan_streak += 1
                if nan_streak >= 3:
                    raise TrainingDiverged(f"batch loss non-finite at epoch {epoch}")
                continue
            nan_streak = 0
            # the optimizer must only ever hold hypernet parameters; the
            # generated surrogate weights live and die inside the tape
            assert len(opt.params) == len(model.parameters())
            opt.step(grads)
            losses.append(value)
        result.epoch_losses.append(float(np.mean(losses)) if losses else math.nan)
    return result

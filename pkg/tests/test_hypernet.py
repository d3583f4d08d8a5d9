import numpy as np
import pytest

from nsc import nn
from nsc.hypernet import (
    EncoderConfig,
    HypernetModel,
    HypernetTrainConfig,
    pad_id_batch,
    train,
)
from nsc.nn import Tape, Tensor
from nsc.rng import Rng
from nsc.surrogate import CoveringTopology, forward_tensors, interpret, interpret_tensors
from nsc.tasks import Task
from nsc.tokenizer import build_vocab, tokenize


def affine_source(a: float, b: float) -> str:
    return f"float f(float x){{return {a:.4f}f*x + {b:.4f}f;}}"


def affine_task(seed: int, rows: int = 128) -> Task:
    rng = Rng(seed)
    a, b = rng.child("a").uniform(-1, 1), rng.child("b").uniform(-1, 1)
    x = rng.child("x").uniform(-1, 1, size=(rows, 1))
    y = a * x + b
    half = rows // 2
    return Task(name=f"affine-{seed}", source=affine_source(a, b), arity=1,
                train_x=x[:half], train_y=y[:half],
                test_x=x[half:], test_y=y[half:])


def tiny_model(sources, seed=0, **enc_kwargs) -> HypernetModel:
    defaults = dict(layers=1, hidden=8, heads=2, feed_forward=16, max_positions=32)
    defaults.update(enc_kwargs)
    return HypernetModel(build_vocab(sources), EncoderConfig(**defaults), Rng(seed))


class TestEncode:
    def test_cls_embedding_length(self):
        model = tiny_model(["a b c"], hidden=8)
        ids = tokenize("a b", model.vocab)
        out = model.encode_ids(ids[None, :])
        assert out.shape == (1, 8)

    def test_pad_tokens_leave_cls_unchanged(self):
        model = tiny_model(["a b c"])
        ids = tokenize("a b c", model.vocab)
        plain = model.encode_ids(ids[None, :]).data
        padded_ids, mask = pad_id_batch([ids, np.concatenate([ids, ids[:3]])],
                                        model.vocab.pad_id)
        padded = model.encode_ids(padded_ids, mask).data
        assert np.max(np.abs(padded[0] - plain[0])) < 1e-10

    def test_identical_inputs_identical_embeddings(self):
        model = tiny_model(["a b"])
        ids = tokenize("a b", model.vocab)
        a = model.encode_ids(ids[None, :]).data
        b = model.encode_ids(ids[None, :]).data
        assert np.array_equal(a, b)

    def test_out_of_range_id_rejected(self):
        model = tiny_model(["a"])
        with pytest.raises(IndexError):
            model.encode_ids(np.array([[len(model.vocab)]]))


class TestCompile:
    def test_output_length_65(self):
        model = HypernetModel(build_vocab(["float f(float x){return x;}"]),
                              EncoderConfig(), Rng(1))
        vec = model.compile("float f(float x){return x;}")
        assert vec.shape == (65,)
        interpret(vec)  # accepted by the covering interpretation

    def test_compile_deterministic(self):
        model = tiny_model(["a b"])
        src = "a b"
        assert np.array_equal(model.compile(src), model.compile(src))


class TestEndToEndGradient:
    def test_finite_difference_through_surrogate_execution(self):
        topo = CoveringTopology((2, 2, 1))
        model = HypernetModel(build_vocab(["a b"]),
                              EncoderConfig(layers=1, hidden=4, heads=1,
                                            feed_forward=8, max_positions=8),
                              Rng(3), topology=topo)
        ids = tokenize("a b", model.vocab)[None, :]
        rng = Rng(4)
        x = rng.uniform(-1, 1, size=(1, 6, 2))
        y = rng.uniform(-1, 1, size=(1, 6, 1))

        def loss_value():
            pvec = model.compile_ids(ids)
            pred = forward_tensors(Tensor(x), interpret_tensors(pvec, topo))
            return nn.mse(pred, Tensor(y))

        with Tape() as tape:
            grads = tape.backward(loss_value())

        h = 1e-5
        for name, p in model.named_parameters():
            flat = p.data.reshape(-1)
            g = grads[p].reshape(-1)
            for i in range(0, flat.size, max(1, flat.size // 5)):  # spot-check
                orig = flat[i]
                flat[i] = orig + h
                hi = loss_value().item()
                flat[i] = orig - h
                lo = loss_value().item()
                flat[i] = orig
                num = (hi - lo) / (2 * h)
                denom = max(abs(num), abs(g[i]), 1e-4)
                assert abs(num - g[i]) / denom < 1e-3, name


class TestTrain:
    def test_single_program_loss_decreases(self):
        task = affine_task(0)
        cfg = HypernetTrainConfig(program_batch=4, input_batch=64, epochs=200,
                                  learning_rate=3e-4, seed=5)
        enc = EncoderConfig(layers=1, hidden=16, heads=2, feed_forward=32,
                            max_positions=64)
        res = train([task], cfg, encoder=enc)
        assert res.epoch_losses[-1] < res.epoch_losses[0]

    def test_trained_compile_beats_untrained_by_10x(self):
        task = affine_task(1)
        enc = EncoderConfig(layers=1, hidden=16, heads=2, feed_forward=32,
                            max_positions=64)
        cfg = HypernetTrainConfig(program_batch=4, input_batch=64, epochs=800,
                                  learning_rate=1e-3, seed=6)
        untrained = HypernetModel(build_vocab([task.source]), enc, Rng(6).child("model"))

        def train_mse(model):
            net = interpret(model.compile(task.source))
            from nsc.surrogate import PaddingMode, pad_batch
            x = pad_batch(task.train_x, PaddingMode.ZERO)
            return float(np.mean((net(x) - task.train_y) ** 2))

        before = train_mse(untrained)
        res = train([task], cfg, encoder=enc)
        assert train_mse(res.model) <= 0.1 * before

    def test_seed_contract(self):
        tasks = [affine_task(s, rows=64) for s in range(3)]
        enc = EncoderConfig(layers=1, hidden=8, heads=2, feed_forward=16,
                            max_positions=64)
        cfg = HypernetTrainConfig(program_batch=2, input_batch=16, epochs=3,
                                  seed=7)
        a = train(tasks, cfg, encoder=enc)
        b = train(tasks, cfg, encoder=enc)
        assert a.epoch_losses == b.epoch_losses
        c = train(tasks, HypernetTrainConfig(program_batch=2, input_batch=16,
                                             epochs=3, seed=8), encoder=enc)
        assert a.epoch_losses != c.epoch_losses

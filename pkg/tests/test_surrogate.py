import math

import numpy as np
import pytest

from nsc.rng import Rng
from nsc.surrogate import (
    COVERING,
    PARAM_COUNT,
    CoveringTopology,
    FinetuneConfig,
    MlpSurrogate,
    OutputStrategy,
    PaddingMode,
    Splits,
    adapt_outputs,
    finetune,
    flatten,
    interpret,
    pad_batch,
    pad_input,
    prune_inputs,
    reported_test_loss,
)


def make_splits(xs, ys, val_frac=0.0, test_frac=0.5):
    n = xs.shape[0]
    n_test = int(n * test_frac)
    n_val = int(n * val_frac)
    return Splits(
        train_x=xs[: n - n_val - n_test], train_y=ys[: n - n_val - n_test],
        val_x=xs[n - n_val - n_test: n - n_test], val_y=ys[n - n_val - n_test: n - n_test],
        test_x=xs[n - n_test:], test_y=ys[n - n_test:],
    )


class TestTopology:
    def test_param_count_is_65(self):
        assert PARAM_COUNT == 65
        assert COVERING.param_count() == 9 * 4 + 4 + 4 * 4 + 4 + 4 * 1 + 1

    def test_custom_topology_count(self):
        assert CoveringTopology((3, 2, 1)).param_count() == 3 * 2 + 2 + 2 * 1 + 1


class TestInterpret:
    def test_zero_vector_outputs_zero_everywhere(self):
        net = interpret(np.zeros(65))
        x = Rng(0).uniform(-1, 1, size=(50, 9))
        assert np.array_equal(net(x), np.zeros((50, 1)))

    def test_round_trip_identity(self):
        for i in range(100):
            v = Rng(i).normal(size=65)
            assert np.array_equal(flatten(interpret(v)), v)

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError):
            interpret(np.zeros(64))


class TestPadding:
    def test_zero_pad(self):
        assert np.array_equal(
            pad_input([1.0, 2.0, 3.0], PaddingMode.ZERO),
            [1, 2, 3, 0, 0, 0, 0, 0, 0],
        )

    def test_full_arity_unchanged(self):
        x = Rng(1).uniform(-1, 1, size=(4, 9))
        assert np.array_equal(pad_batch(x, PaddingMode.ZERO), x)
        assert np.array_equal(pad_batch(x, PaddingMode.RANDOM, Rng(2)), x)

    def test_random_pad_distribution(self):
        padded = pad_batch(np.zeros((10_000, 3)), PaddingMode.RANDOM, Rng(3))
        tail = padded[:, 3:]
        assert tail.min() >= -1.0 and tail.max() <= 1.0
        assert abs(tail.mean()) < 0.02

    def test_over_arity_rejected(self):
        with pytest.raises(ValueError):
            pad_batch(np.zeros((1, 10)), PaddingMode.ZERO)


class TestAdaptOutputs:
    def test_clone_outputs_equal_everywhere(self):
        v = Rng(4).normal(size=65)
        net = adapt_outputs(v, 2, OutputStrategy.CLONE, Rng(5))
        w, b = net.layers[-1]
        assert np.array_equal(w[:, 0], w[:, 1]) and b[0] == b[1]
        out = net(Rng(6).uniform(-1, 1, size=(200, 9)))
        assert np.array_equal(out[:, 0], out[:, 1])

    def test_grow_k1_is_identity(self):
        v = Rng(7).normal(size=65)
        net = adapt_outputs(v, 1, OutputStrategy.GROW, Rng(8))
        assert np.array_equal(flatten(net), v)

    def test_reinitialize_keeps_hidden_layers(self):
        v = Rng(9).normal(size=65)
        base = interpret(v)
        net = adapt_outputs(v, 2, OutputStrategy.REINITIALIZE, Rng(10))
        for (w0, b0), (w1, b1) in zip(base.layers[:-1], net.layers[:-1]):
            assert np.array_equal(w0, w1) and np.array_equal(b0, b1)
        assert net.layers[-1][0].shape == (4, 2)
        # final-layer weights look He-initialized: zero-mean, variance near 2/4
        draws = np.concatenate(
            [adapt_outputs(v, 40, OutputStrategy.REINITIALIZE, Rng(s)).layers[-1][0].reshape(-1)
             for s in range(80)]
        )
        assert draws.var() == pytest.approx(2.0 / 4.0, rel=0.2)
        assert np.array_equal(net.layers[-1][1], np.zeros(2))

    def test_k_below_one_rejected(self):
        with pytest.raises(ValueError):
            adapt_outputs(np.zeros(65), 0, OutputStrategy.CLONE, Rng(0))


class TestPruneInputs:
    def test_full_arity_identity(self):
        v = Rng(11).normal(size=65)
        net = interpret(v)
        pruned = prune_inputs(net, 9)
        assert np.array_equal(flatten(pruned), v)

    def test_prune_equals_zero_pad_exactly(self):
        v = Rng(12).normal(size=65)
        net = interpret(v)
        pruned = prune_inputs(net, 3)
        x = Rng(13).uniform(-1, 1, size=(1000, 3))
        padded = pad_batch(x, PaddingMode.ZERO)
        assert np.array_equal(pruned(x), net(padded))

    def test_pruned_first_layer_shape(self):
        net = prune_inputs(interpret(np.zeros(65)), 4)
        assert net.layers[0][0].shape == (4, 4)


class TestReportingRule:
    def test_nearest_logged_epoch(self):
        # val computed on a denser grid than test; best val at epoch 7
        val_epochs = [0, 1, 2, 3, 4, 5, 6, 7, 8]
        val_losses = [9, 8, 7, 6, 5, 4, 3, 1, 2]
        test_epochs = [0, 3, 6, 9]
        test_losses = [40.0, 30.0, 20.0, 10.0]
        best, reported = reported_test_loss(val_epochs, val_losses, test_epochs, test_losses)
        assert best == 7
        assert reported == 20.0  # 6 is nearer 7 than 9 under earlier-epoch ties? |7-6|=1=|7-8|; 6 wins

    def test_tie_prefers_earlier_epoch(self):
        best, reported = reported_test_loss([0, 2], [1.0, 1.0], [0, 2], [5.0, 6.0])
        assert best == 0 and reported == 5.0

    def test_no_val_degrades_to_final(self):
        best, reported = reported_test_loss([0, 3], [math.nan, math.nan], [0, 3], [8.0, 4.0])
        assert best == 3 and reported == 4.0


class TestFinetune:
    def test_zero_epochs_reports_initial_loss(self):
        rng = Rng(20)
        x = pad_batch(rng.uniform(-1, 1, size=(64, 1)), PaddingMode.ZERO)
        y = 0.3 * x[:, :1]
        splits = make_splits(x, y)
        trace = finetune(rng.normal(size=65), splits, FinetuneConfig(epochs=0))
        assert trace.logged_epochs == [0]
        assert trace.reported_test_loss == trace.test_losses[0]

    def test_constant_zero_target_zero_init(self):
        x = pad_batch(Rng(21).uniform(-1, 1, size=(32, 2)), PaddingMode.ZERO)
        y = np.zeros((32, 1))
        trace = finetune(np.zeros(65), make_splits(x, y), FinetuneConfig(epochs=9))
        assert all(l == 0.0 for l in trace.train_losses)
        assert trace.reported_test_loss == 0.0

    def test_fits_linear_target(self):
        rng = Rng(22)
        x = pad_batch(rng.uniform(-1, 1, size=(256, 1)), PaddingMode.ZERO)
        y = 0.3 * x[:, :1]
        init = flatten_he(seed=23)
        trace = finetune(init, make_splits(x, y, val_frac=0.1, test_frac=0.25),
                         FinetuneConfig(epochs=5000))
        assert trace.train_losses[-1] < 1e-3

    def test_bitwise_reproducible(self):
        rng = Rng(24)
        x = pad_batch(rng.uniform(-1, 1, size=(40, 2)), PaddingMode.ZERO)
        y = (x[:, :1] * x[:, 1:2])
        init = flatten_he(seed=25)
        cfg = FinetuneConfig(epochs=60, seed=9, batch_size=16)
        a = finetune(init, make_splits(x, y), cfg)
        b = finetune(init, make_splits(x, y), cfg)
        assert np.array_equal(a.final_params, b.final_params)
        assert a.test_losses == b.test_losses

    def test_nan_loss_aborts_with_diagnostic(self):
        x = pad_batch(np.full((8, 1), 1.0), PaddingMode.ZERO)
        y = np.full((8, 1), 1e200)  # diverges immediately at lr high enough
        with np.errstate(over="ignore"):
            trace = finetune(np.zeros(65), make_splits(x, y),
                             FinetuneConfig(epochs=50, learning_rate=1e6))
        assert trace.aborted
        assert "non-finite" in trace.diagnostic


def flatten_he(seed: int) -> np.ndarray:
    from nsc.baselines import random_init

    return random_init(COVERING, seed)

import numpy as np
import pytest

from nsc.hypernet import EncoderConfig, HypernetModel
from nsc.rng import Rng
from nsc.serialization import (
    SchemaError,
    load_model,
    load_params,
    save_model,
    save_params,
)
from nsc.tokenizer import build_vocab, tokenize


class TestParamsFormat:
    def test_round_trip(self, tmp_path):
        v = Rng(0).normal(size=65)
        p = tmp_path / "p.vec"
        save_params(v, p)
        assert np.array_equal(load_params(p), v)

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "junk.vec"
        p.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(SchemaError):
            load_params(p)

    def test_version_mismatch_rejected(self, tmp_path):
        import struct

        p = tmp_path / "old.vec"
        p.write_bytes(b"NSPV" + struct.pack("<IQ", 99, 0))
        with pytest.raises(SchemaError):
            load_params(p)


class TestModelCheckpoint:
    def test_round_trip_preserves_compile_output(self, tmp_path):
        sources = ["float f(float x){return 0.5f*x;}",
                   "float g(float y){return y + 0.25f;}"]
        model = HypernetModel(build_vocab(sources),
                              EncoderConfig(layers=1, hidden=8, heads=2,
                                            feed_forward=16, max_positions=32),
                              Rng(4))
        path = tmp_path / "m.ckpt"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.vocab.id_to_token == model.vocab.id_to_token
        for src in sources:
            assert np.array_equal(loaded.compile(src), model.compile(src))

    def test_vocab_ids_survive(self, tmp_path):
        model = HypernetModel(build_vocab(["a b c"]),
                              EncoderConfig(layers=1, hidden=4, heads=1,
                                            feed_forward=8, max_positions=16),
                              Rng(0))
        path = tmp_path / "m.ckpt"
        save_model(model, path)
        loaded = load_model(path)
        ids_a = tokenize("a c", model.vocab)
        ids_b = tokenize("a c", loaded.vocab)
        assert np.array_equal(ids_a, ids_b)

    def test_truncated_checkpoint_rejected(self, tmp_path):
        model = HypernetModel(build_vocab(["a"]),
                              EncoderConfig(layers=1, hidden=4, heads=1,
                                            feed_forward=8, max_positions=16),
                              Rng(0))
        path = tmp_path / "m.ckpt"
        save_model(model, path)
        clipped = tmp_path / "clip.ckpt"
        clipped.write_bytes(path.read_bytes()[:40])
        with pytest.raises(Exception):
            load_model(clipped)

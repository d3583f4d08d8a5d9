"""Binary artifact formats: parameter vectors and model checkpoints.

Both formats carry a magic string and a version; readers reject mismatches
so stale artifacts fail loudly.  All scalars are little-endian; parameter
data is 64-bit reals.
"""

from __future__ import annotations

import struct

import numpy as np

from .hypernet import EncoderConfig, HypernetModel
from .rng import Rng
from .surrogate import CoveringTopology
from .tokenizer import Vocab

PARAMS_MAGIC = b"NSPV"
PARAMS_VERSION = 1
MODEL_MAGIC = b"NSCM"
MODEL_VERSION = 1


class SchemaError(ValueError):
    """Magic or version mismatch on a binary artifact."""


def save_params(params: np.ndarray, path) -> None:
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    with open(path, "wb") as fh:
        fh.write(PARAMS_MAGIC)
        fh.write(struct.pack("<IQ", PARAMS_VERSION, params.size))
        fh.write(params.astype("<f8").tobytes())


def load_params(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != PARAMS_MAGIC:
            raise SchemaError(f"not a parameter vector file (magic {magic!r})")
        version, length = struct.unpack("<IQ", fh.read(12))
        if version != PARAMS_VERSION:
            raise SchemaError(f"parameter vector version {version}, expected {PARAMS_VERSION}")
        data = np.frombuffer(fh.read(8 * length), dtype="<f8")
        if data.size != length:
            raise SchemaError("truncated parameter vector file")
    return data.astype(np.float64)


def _write_str(fh, s: str) -> None:
    raw = s.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", fh.read(4))
    return fh.read(n).decode("utf-8")


def save_model(model: HypernetModel, path) -> None:
    """Versioned header, vocab table, then parameter tensors in declaration order."""
    cfg = model.config
    topo = model.topology.layer_sizes
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION))
        fh.write(struct.pack("<6I", cfg.layers, cfg.hidden, cfg.heads,
                             cfg.feed_forward, cfg.max_positions, len(topo)))
        fh.write(struct.pack(f"<{len(topo)}I", *topo))
        corpus_tokens = model.vocab.id_to_token[3:]  # reserved ids are implicit
        fh.write(struct.pack("<I", len(corpus_tokens)))
        for tok in corpus_tokens:
            _write_str(fh, tok)
        params = model.named_parameters()
        fh.write(struct.pack("<I", len(params)))
        for name, tensor in params:
            _write_str(fh, name)
            shape = tensor.data.shape
            fh.write(struct.pack("<I", len(shape)))
            fh.write(struct.pack(f"<{len(shape)}Q", *shape))
            fh.write(tensor.data.astype("<f8").tobytes())


def load_model(path) -> HypernetModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MODEL_MAGIC:
            raise SchemaError(f"not a model checkpoint (magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != MODEL_VERSION:
            raise SchemaError(f"checkpoint version {version}, expected {MODEL_VERSION}")
        layers, hidden, heads, ff, maxpos, n_topo = struct.unpack("<6I", fh.read(24))
        topo = struct.unpack(f"<{n_topo}I", fh.read(4 * n_topo))
        (n_tokens,) = struct.unpack("<I", fh.read(4))
        tokens = [_read_str(fh) for _ in range(n_tokens)]
        model = HypernetModel(
            Vocab(tokens),
            EncoderConfig(layers=layers, hidden=hidden, heads=heads,
                          feed_forward=ff, max_positions=maxpos),
            Rng(0),
            topology=CoveringTopology(tuple(topo)),
        )
        (n_params,) = struct.unpack("<I", fh.read(4))
        named = model.named_parameters()
        if n_params != len(named):
            raise SchemaError(f"checkpoint has {n_params} tensors, model wants {len(named)}")
        for name, tensor in named:
            stored = _read_str(fh)
            if stored != name:
                raise SchemaError(f"tensor order mismatch: {stored} != {name}")
            (rank,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{rank}Q", fh.read(8 * rank))
            if tuple(shape) != tensor.data.shape:
                raise SchemaError(f"tensor {name} shape {shape} != {tensor.data.shape}")
            count = int(np.prod(shape)) if shape else 1
            tensor.data = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape).copy()
    return model

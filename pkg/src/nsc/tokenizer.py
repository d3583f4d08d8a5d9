"""Deterministic C-aware tokenizer and frequency-ranked vocabulary.

One tokenizer serves the whole system: it feeds the program encoder and it
is the whitespace-invariant fingerprint used to deduplicate mined functions.
Identifiers, numeric literals, and string/char literals are single tokens;
multi-character C operators lex as single tokens by longest match.
"""

from __future__ import annotations

import re

import numpy as np

CLS = "[CLS]"
PAD = "[PAD]"
UNK = "[UNK]"
RESERVED = (CLS, PAD, UNK)

MAX_TOKENS = 512  # sequence length cap, classification token included

_NUMBER = re.compile(
    r"0[xX][0-9a-fA-F]+[uUlL]*"
    r"|(?:\d+\.\d*|\.\d+|\d+)(?:[eEpP][+-]?\d+)?[fFlLuU]*"
)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_STRING = re.compile(r'"(?:[^"\\\n]|\\.)*"')
_CHAR = re.compile(r"'(?:[^'\\\n]|\\.)*'")
_OPERATORS = (
    "<<=", ">>=", "...",
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "^=", "|=", "##",
)


class SequenceTooLong(ValueError):
    """Tokenized program exceeds the encoder context length."""


def lex(source: str) -> list[str]:
    """Split C source into tokens; whitespace never survives."""
    tokens = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"':
            m = _STRING.match(source, i)
            if m:
                tokens.append(m.group())
                i = m.end()
                continue
        if ch == "'":
            m = _CHAR.match(source, i)
            if m:
                tokens.append(m.group())
                i = m.end()
                continue
        if ch.isalpha() or ch == "_":
            m = _IDENT.match(source, i)
            tokens.append(m.group())
            i = m.end()
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER.match(source, i)
            tokens.append(m.group())
            i = m.end()
            continue
        for op in _OPERATORS:
            if source.startswith(op, i):
                tokens.append(op)
                i += len(op)
                break
        else:
            tokens.append(ch)
            i += 1
    return tokens


class Vocab:
    """Token-to-id map with dense ids and reserved [CLS]/[PAD]/[UNK]."""

    def __init__(self, tokens: list[str]):
        for r in RESERVED:
            if r in tokens:
                raise ValueError(f"reserved token {r} collides with corpus token")
        self.id_to_token = list(RESERVED) + list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def cls_id(self) -> int:
        return self.token_to_id[CLS]

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    def encode(self, token: str) -> int:
        return self.token_to_id.get(token, self.unk_id)


def build_vocab(sources, max_size: int = 30_522) -> Vocab:
    """Frequency-ranked vocabulary; ties break lexicographically."""
    counts: dict[str, int] = {}
    empty = True
    for src in sources:
        empty = False
        for tok in lex(src):
            counts[tok] = counts.get(tok, 0) + 1
    if empty:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts, key=lambda t: (-counts[t], t))
    return Vocab(ranked[: max_size - len(RESERVED)])


def tokenize(source: str, vocab: Vocab, max_tokens: int = MAX_TOKENS) -> np.ndarray:
    """Token ids with [CLS] prepended; rejects over-length sequences."""
    toks = lex(source)
    if len(toks) + 1 > max_tokens:
        raise SequenceTooLong(f"{len(toks) + 1} tokens exceeds limit {max_tokens}")
    return np.array([vocab.cls_id] + [vocab.encode(t) for t in toks], dtype=np.int64)


def token_fingerprint(source: str) -> tuple[str, ...]:
    """Whitespace-invariant identity used by the corpus dedup stage."""
    return tuple(lex(source))

import pytest

from nsc.tokenizer import (
    CLS,
    PAD,
    SequenceTooLong,
    UNK,
    Vocab,
    build_vocab,
    lex,
    token_fingerprint,
    tokenize,
)


class TestLex:
    def test_c_function_splitting(self):
        toks = lex("float f(float x){return x;}")
        assert toks == ["float", "f", "(", "float", "x", ")", "{", "return", "x", ";", "}"]

    def test_whitespace_invariance(self):
        a = "float f(float x){return 0.37f*x + -0.12f;}"
        b = "float f ( float x )\n{\n  return 0.37f * x + -0.12f ;\n}"
        assert lex(a) == lex(b)
        assert token_fingerprint(a) == token_fingerprint(b)

    def test_numeric_literals_single_tokens(self):
        assert lex("1.5e-3f") == ["1.5e-3f"]
        assert lex("0x1Fu") == ["0x1Fu"]
        assert lex("x+.5") == ["x", "+", ".5"]

    def test_multichar_operators(self):
        assert lex("a >= b ? a : b") == ["a", ">=", "b", "?", "a", ":", "b"]
        assert lex("x<<=2") == ["x", "<<=", "2"]

    def test_string_and_char_literals(self):
        assert lex('printf("a b", \'c\')') == ["printf", "(", '"a b"', ",", "'c'", ")"]


class TestVocab:
    def test_frequency_order_with_reserved_prefix(self):
        v = build_vocab(["a b", "a"])
        assert v.id_to_token[:3] == [CLS, PAD, UNK]
        assert v.id_to_token[3:] == ["a", "b"]

    def test_tie_breaks_lexicographically(self):
        v = build_vocab(["b a"])
        assert v.id_to_token[3:] == ["a", "b"]

    def test_overflow_tokens_map_to_unk(self):
        v = build_vocab(["a a b c"], max_size=4)  # room for 1 corpus token
        assert len(v) == 4
        assert v.encode("a") == 3
        assert v.encode("b") == v.unk_id
        assert v.encode("c") == v.unk_id

    def test_rebuild_is_identical(self):
        corpus = ["float f(float x){return x;}", "double g(double y){return y*y;}"]
        assert build_vocab(corpus).id_to_token == build_vocab(corpus).id_to_token

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            build_vocab([])


class TestTokenize:
    def test_cls_prepended_and_ids_dense(self):
        v = build_vocab(["x y"])
        ids = tokenize("x y", v)
        assert ids[0] == v.cls_id
        assert ids.tolist() == [v.cls_id, v.encode("x"), v.encode("y")]

    def test_unknown_identifier_becomes_unk(self):
        v = build_vocab(["x"])
        ids = tokenize("z", v)
        assert ids.tolist() == [v.cls_id, v.unk_id]

    def test_overlong_sequence_rejected(self):
        v = build_vocab(["x"])
        with pytest.raises(SequenceTooLong):
            tokenize("x " * 512, v)

    def test_length_limit_counts_cls(self):
        v = build_vocab(["x"])
        assert tokenize("x " * 511, v).shape == (512,)

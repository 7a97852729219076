import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockpool.errors import ArgumentError, ParseError
from blockpool.subword import (
    SubwordVocab,
    avg_downsampling_factor,
    load_vocab,
    save_vocab,
    train_bpe,
    tune_vocab,
)


def test_byte_only_vocab():
    with pytest.warns(UserWarning):
        v = train_bpe(["ab ab"], size=256, lmax=4)
    assert v.size == 256
    assert v.tokenize("ab") == [b"a", b"b"]


def test_hand_run_bpe_learns_aa():
    v = train_bpe(["aaaa aaaa"], size=258, lmax=2)
    assert b"aa" in v.pieces
    pieces = v.tokenize("aaaa")
    assert pieces == [b"aa", b"aa"]


def test_lmax_one_forces_bytes():
    v = train_bpe(["aaaa aaaa bbbb"], size=300, lmax=1)
    assert v.size == 256
    assert all(len(p) == 1 for p in v.pieces)


def test_empty_corpus():
    with pytest.raises(ArgumentError):
        train_bpe([], size=300, lmax=4)
    with pytest.raises(ArgumentError):
        train_bpe(["", ""], size=300, lmax=4)


def test_cap_enforced():
    v = train_bpe(["abcdefgh abcdefgh abcdefgh"], size=400, lmax=3)
    assert all(len(p) <= 3 for p in v.pieces)
    assert all(len(p) <= 3 for p in v.tokenize("abcdefgh"))


def test_word_marker_folds_space():
    v = train_bpe(["the cat the cat the cat"], size=300, lmax=4)
    pieces = v.tokenize("the cat")
    assert b"".join(pieces) == b"the cat"
    # mid-sentence word carries its leading space
    assert any(p.startswith(b" ") for p in pieces)


@settings(max_examples=150, deadline=None)
@given(st.text(min_size=0, max_size=50))
def test_totality(text):
    v = _shared_vocab()
    assert b"".join(v.tokenize(text)) == text.encode("utf-8")


_CACHE = {}


def _shared_vocab():
    if "v" not in _CACHE:
        _CACHE["v"] = train_bpe(["the quick brown fox jumps"] * 4, size=280, lmax=5)
    return _CACHE["v"]


def test_determinism():
    corpus = ["some words repeat some words", "other words here"]
    a = train_bpe(corpus, size=290, lmax=4)
    b = train_bpe(corpus, size=290, lmax=4)
    assert a.pieces == b.pieces and a.merges == b.merges


def test_avg_factor_arithmetic():
    v = _shared_vocab()

    class Fake(SubwordVocab):
        pass

    stats = avg_downsampling_factor(v, ["the quick brown fox jumps"])
    text_bytes = len("the quick brown fox jumps".encode())
    assert stats.total_bytes == text_bytes
    assert stats.avg_factor == text_bytes / stats.total_tokens


def test_avg_factor_byte_only_is_one():
    with pytest.warns(UserWarning):
        v = train_bpe(["xy z"], size=256, lmax=4)
    stats = avg_downsampling_factor(v, ["xy z", "more text"])
    assert stats.avg_factor == 1.0


def test_avg_factor_empty():
    v = _shared_vocab()
    with pytest.raises(ArgumentError):
        avg_downsampling_factor(v, [])


def test_tuner_exact_optimum():
    corpus = ["aa bb aa bb aa"] * 4
    vocab, stats = tune_vocab(corpus, target_factor=1.0, size_grid=[256, 300], lmax_grid=[1, 3])
    assert stats.avg_factor == 1.0
    assert vocab.size == 256  # tie broken toward smaller size


def test_tuner_byte_only_for_target_one():
    vocab, stats = tune_vocab(["hello world"] * 3, 1.0, size_grid=[280], lmax_grid=[1, 4])
    assert vocab.lmax == 1
    assert stats.avg_factor == 1.0


def test_tuner_optimal_over_grid():
    corpus = ["the cat sat on the mat", "a cat and a mat"] * 3
    grid_s, grid_l = [258, 280, 320], [2, 3, 4]
    vocab, stats = tune_vocab(corpus, 2.0, size_grid=grid_s, lmax_grid=grid_l)
    best = min(
        abs(avg_downsampling_factor(train_bpe(corpus, s, l), corpus).avg_factor - 2.0)
        for s in grid_s
        for l in grid_l
    )
    assert abs(stats.avg_factor - 2.0) == pytest.approx(best, abs=1e-12)


def test_save_load_roundtrip_byte_only(tmp_path):
    with pytest.warns(UserWarning):
        v = train_bpe(["abc"], size=256, lmax=2)
    p = tmp_path / "v.vocab"
    save_vocab(v, p)
    w = load_vocab(p)
    assert w.pieces == v.pieces and w.merges == v.merges and w.lmax == v.lmax


def test_save_load_roundtrip_trained(tmp_path):
    v = train_bpe(["the cat sat on the mat today"] * 5, size=310, lmax=5)
    p = tmp_path / "v.vocab"
    save_vocab(v, p)
    w = load_vocab(p)
    assert w.pieces == v.pieces
    for text in ["the cat sat", "on the mat", "unseen wørds ok"]:
        assert w.tokenize(text) == v.tokenize(text)


def test_load_duplicate_piece_rejected(tmp_path):
    v = train_bpe(["aaaa aaaa"], size=258, lmax=2)
    p = tmp_path / "v.vocab"
    save_vocab(v, p)
    lines = p.read_text().splitlines()
    lines.append(lines[-1].replace(lines[-1].split("\t")[0], str(v.size), 1))
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError):
        load_vocab(p)

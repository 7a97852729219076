import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockpool.errors import ArgumentError, DimensionError
from blockpool.segmenter import (
    BOS,
    EOS,
    SPACE,
    ByteSeq,
    Segmentation,
    consistency_report,
    detokenize,
    encode_text,
    normalize_ws,
    segment_buffered_fixed,
    segment_fixed,
    segment_sdd,
    segment_wdd,
)
from blockpool.subword import train_bpe


def test_encode_empty_with_wrap():
    assert encode_text("", add_bos_eos=True).symbols == (257, 258)


def test_encode_ascii_identity():
    assert encode_text("Hi").symbols == (72, 105)


def test_encode_multibyte_matches_utf8():
    ch = "é"  # 2-byte UTF-8 character
    ref = tuple(ch.encode("utf-8"))
    assert len(ref) == 2
    assert encode_text(ch).symbols == ref


def test_fixed_exact_division():
    seq = ByteSeq(tuple(range(12)))
    assert segment_fixed(seq, 4).lengths == (4, 4, 4)


def test_fixed_remainder():
    seq = ByteSeq(tuple(range(13)))
    assert segment_fixed(seq, 4).lengths == (4, 4, 4, 1)


def test_fixed_short_sequence():
    seq = ByteSeq(tuple(range(3)))
    assert segment_fixed(seq, 4).lengths == (3,)


def test_fixed_bad_args():
    with pytest.raises(ArgumentError):
        segment_fixed(ByteSeq((1, 2)), 0)
    with pytest.raises(ArgumentError):
        segment_fixed(ByteSeq(()), 4)


def test_buffered_fixed_two_words():
    seq, seg = segment_buffered_fixed("is a", 4)
    # "is␣␣" then "a␣␣" + EOS closing the final block
    assert seg.lengths == (4, 4)
    assert seq.symbols[:4] == (ord("i"), ord("s"), SPACE, SPACE)
    assert seq.symbols[4:7] == (ord("a"), SPACE, SPACE)
    assert seq.symbols[7] == EOS


def test_buffered_fixed_single_word():
    seq, seg = segment_buffered_fixed("go", 4)
    assert seg.lengths == (4,)
    assert seq.symbols == (ord("g"), ord("o"), SPACE, EOS)


def test_buffered_fixed_word_of_k_minus_one():
    seq, seg = segment_buffered_fixed("abc", 4)
    assert seg.lengths == (4,)
    assert seq.symbols == (ord("a"), ord("b"), ord("c"), EOS)


def test_buffered_fixed_word_alignment():
    text = "the quick brown fox jumps over lazy dogs"
    seq, seg = segment_buffered_fixed(text, 4)
    assert all(l == 4 for l in seg.lengths)
    # every word's first byte lands on a block boundary
    raw = list(seq.symbols)
    for word in text.split():
        first = word.encode()[0]
        positions = [i for i, s in enumerate(raw) if s == first]
        assert any(p % 4 == 0 for p in positions)


def test_wdd_factor_ten_example():
    seq = encode_text("Characters are great!")
    seg = segment_wdd(seq)
    assert seg.lengths == (10, 4, 7)


def test_wdd_single_char():
    assert segment_wdd(encode_text("a")).lengths == (1,)


def test_wdd_space_attaches_forward():
    assert segment_wdd(encode_text("a b")).lengths == (1, 2)


def test_wdd_bos_eos_own_blocks():
    seg = segment_wdd(encode_text("a b", add_bos_eos=True))
    assert seg.lengths == (1, 1, 2, 1)


@pytest.fixture(scope="module")
def tiny_vocab():
    corpus = ["aaaa aaaa", "the cat sat", "aaaa the"] * 5
    return train_bpe(corpus, size=280, lmax=4)


def test_sdd_lengths_are_piece_lengths(tiny_vocab):
    text = "aaaa the cat"
    seq = encode_text(text, add_bos_eos=True)
    seg = segment_sdd(seq, tiny_vocab)
    pieces = tiny_vocab.tokenize(text)
    assert seg.lengths == (1,) + tuple(len(p) for p in pieces) + (1,)
    assert seg.total() == len(seq)


def test_sdd_single_byte(tiny_vocab):
    seq = encode_text("q")
    assert segment_sdd(seq, tiny_vocab).lengths == (1,)


def test_sdd_cap(tiny_vocab):
    text = "extraordinarily aaaa aaaaaaaaaaaa"
    seg = segment_sdd(encode_text(text), tiny_vocab)
    assert max(seg.lengths) <= tiny_vocab.lmax


def test_detokenize_trivial():
    seq = ByteSeq((257, 72, 105, 258))
    seg = Segmentation((1, 2, 1), method="wdd")
    assert detokenize(seq, seg) == "Hi"


def test_detokenize_buffered_roundtrip():
    seq, seg = segment_buffered_fixed("is a", 4)
    assert detokenize(seq, seg) == "is a"


def test_detokenize_length_mismatch():
    with pytest.raises(DimensionError):
        detokenize(ByteSeq((72,)), Segmentation((2,), method="fixed", k=2))


texts = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=60
).map(normalize_ws).filter(lambda t: t)


@settings(max_examples=200, deadline=None)
@given(texts)
def test_roundtrip_all_methods(text):
    vocab = _roundtrip_vocab()
    for method in ("fixed", "buffered_fixed", "wdd", "sdd"):
        if method == "buffered_fixed":
            seq, seg = segment_buffered_fixed(text, 4)
        else:
            seq = encode_text(text, add_bos_eos=True)
            if method == "fixed":
                seg = segment_fixed(seq, 4)
            elif method == "wdd":
                seg = segment_wdd(seq)
            else:
                seg = segment_sdd(seq, vocab)
        assert seg.total() == len(seq), method
        assert detokenize(seq, seg) == text, method


_VOCAB_CACHE = {}


def _roundtrip_vocab():
    if "v" not in _VOCAB_CACHE:
        _VOCAB_CACHE["v"] = train_bpe(["the cat sat on a mat"] * 3, size=270, lmax=4)
    return _VOCAB_CACHE["v"]


def test_consistency_fixed_offsets():
    # after BOS, "bb" starts at index 1 in the first sentence, index 3 in the
    # second: two positional variants under k=4 blocking
    corpus = ["bb x", "a bb"]
    rep = consistency_report(corpus, method="fixed", k=4)
    assert rep.variant_counts["bb"] == 2


def test_consistency_buffered_is_positionally_stable():
    corpus = ["bb x", "a bb", "longer bb here"]
    rep = consistency_report(corpus, method="buffered_fixed", k=4)
    assert rep.variant_counts["bb"] == 1


def test_consistency_sdd_single_variant(tiny_vocab):
    # every repeated word occurs in the same context-free form (always
    # mid-sentence, or always sentence-initial), so its chunk tokenizes
    # identically everywhere: exactly one variant per type
    corpus = ["x the cat", "x cat the", "x a cat sat"]
    rep = consistency_report(corpus, method="sdd", vocab=tiny_vocab)
    assert all(v == 1 for v in rep.variant_counts.values())


def test_consistency_histogram_sums():
    rep = consistency_report(["aa bb cc"] * 3, method="wdd")
    assert sum(rep.histogram.values()) == rep.num_blocks


def test_consistency_empty_corpus():
    with pytest.raises(ArgumentError):
        consistency_report([], method="fixed", k=4)

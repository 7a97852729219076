import numpy as np
import pytest

from blockpool.downsampler import DownsampleConfig
from blockpool.errors import ConfigError
from blockpool.segmenter import EOS
from blockpool.subword import train_bpe
from blockpool.transformer import ModelConfig
from blockpool.upsampler import UpsampleConfig
from blockpool.variants import Model, VariantSpec, build

TINY = dict(d_model=32, n_heads=2, n_enc_layers=1, n_dec_layers=1, d_ff=48, dropout=0.0)


@pytest.fixture(scope="module")
def vocab():
    corpus = ["the cat sat on the mat", "a dog ran fast", "cats and dogs play"] * 4
    return train_bpe(corpus, size=300, lmax=5)


def spec_for(name, vocab, task="translation", labels=None, k=4, lmax=6):
    model = ModelConfig(**TINY)
    down = up = None
    if name in ("fixed", "buffered_fixed", "wdd", "sdd"):
        down = DownsampleConfig(k=k, d_char=32, conv=[(3, 32), (3, 32)], method=name)
        if task == "translation":
            variant = "fixed" if name in ("fixed", "buffered_fixed") else "variable"
            up = UpsampleConfig(variant=variant, d_slice=8, lmax_bytes=lmax, d_char_embed=16, d_lstm=24, k=k)
    if name == "two_step_subword":
        up = UpsampleConfig(variant="one_to_one", d_slice=8, d_char_embed=16, d_lstm=24)
    v = vocab if name in ("subword", "sdd", "two_step_subword") else None
    return VariantSpec(name=name, task=task, model=model, down=down, up=up, vocab=v, labels=labels)


ALL = ["subword", "char", "fixed", "buffered_fixed", "wdd", "sdd", "two_step_subword"]


@pytest.mark.parametrize("name", ALL)
def test_build_and_forward(name, vocab):
    m = build(spec_for(name, vocab), seed=1)
    logits, targets = m.forward_logits("the cat sat", "a dog ran")
    assert logits.data.shape[0] == targets.shape[0]
    assert np.all(np.isfinite(logits.data))


def test_char_variant_has_no_down_up_params(vocab):
    m = build(spec_for("char", vocab), seed=2)
    assert not any(k.startswith(("enc_down.", "dec_down.", "ups.")) for k in m.params)


def test_core_shapes_identical_across_variants(vocab):
    shapes = [build(spec_for(n, vocab), seed=3).core_shapes() for n in ALL]
    assert all(s == shapes[0] for s in shapes[1:])


def test_param_counts_differ_only_outside_core(vocab):
    models = {n: build(spec_for(n, vocab), seed=4) for n in ALL}
    core = {
        n: sum(np.prod(s) for s in m.core_shapes().values()) for n, m in models.items()
    }
    assert len(set(core.values())) == 1
    # totals differ across variants because of embeddings and down/up modules
    totals = {n: m.num_params() for n, m in models.items()}
    assert totals["sdd"] != totals["char"] != totals["subword"]


def test_sdd_block_count_is_tokens_plus_specials(vocab):
    m = build(spec_for("sdd", vocab), seed=5)
    text = "the cat sat"
    n_tokens = len(vocab.tokenize(text))
    blocks = m.source_block_embeddings(text)
    assert blocks.data.shape[0] == n_tokens + 2  # BOS and EOS blocks


def test_inconsistent_spec_rejected(vocab):
    spec = spec_for("sdd", vocab)
    spec.vocab = None
    with pytest.raises(ConfigError):
        build(spec, seed=6)


def test_sdd_leak_future_target_blocks(vocab):
    # perturbing bytes in later gold blocks leaves earlier step logits
    # unchanged to 0 ulp (float64)
    m = build(spec_for("sdd", vocab), seed=7)
    enc, _ = m.encode_source("the cat")
    gold = [[104, 105], [32, 119], [111, 114]]
    base, _ = m.forward_logits_blocks(enc, gold)
    pert, _ = m.forward_logits_blocks(enc, [[104, 105], [32, 119], [1, 2]])
    steps_before_block2 = (2 + 1) * 2
    assert np.array_equal(base.data[:steps_before_block2], pert.data[:steps_before_block2])


def test_sdd_leak_future_chars_within_block(vocab):
    m = build(spec_for("sdd", vocab), seed=8)
    enc, _ = m.encode_source("the cat")
    base, _ = m.forward_logits_blocks(enc, [[104, 105, 106], [32, 119]])
    pert, _ = m.forward_logits_blocks(enc, [[104, 99, 98], [32, 119]])
    assert np.array_equal(base.data[:1], pert.data[:1])  # step 0 saw only BOS


def test_fixed_structural_invariance(vocab):
    # within a conditioned block, step t's logits cannot depend on the block's
    # own gold bytes: the direct input lags by k and the hidden only sees
    # earlier blocks
    m = build(spec_for("fixed", vocab), seed=9)
    enc, _ = m.encode_source("abcd")
    gold = [[65, 66, 67, 68], [69, 70, 71, 72], [73, 74, 75, EOS]]
    base, _ = m.forward_logits_blocks(enc, gold)
    pert_block = [[65, 66, 67, 68], [1, 2, 3, 4], [73, 74, 75, EOS]]
    pert, _ = m.forward_logits_blocks(enc, pert_block)
    # steps 4..7 belong to block 1; its own bytes were perturbed
    assert np.array_equal(base.data[4:8], pert.data[4:8])


def test_translate_empty_source(vocab):
    for name in ("sdd", "fixed", "char", "subword"):
        m = build(spec_for(name, vocab), seed=10)
        text, meta = m.translate("", max_blocks=4)
        assert isinstance(text, str)


def test_translate_caps_block_lengths(vocab):
    m = build(spec_for("sdd", vocab, lmax=5), seed=11)
    text, meta = m.translate("the cat sat on the mat", max_blocks=6)
    assert meta["blocks"] <= 6


def test_classifier_distribution(vocab):
    m = build(spec_for("sdd", vocab, task="classification", labels=["neg", "pos"]), seed=12)
    probs = m.classify("the cat sat")
    assert probs.shape == (2,)
    assert abs(probs.sum() - 1.0) < 1e-9


def test_classifier_pad_equivalence(vocab):
    m = build(spec_for("sdd", vocab, task="classification", labels=["a", "b", "c"]), seed=13)
    plain = m.classify("the cat sat")
    padded = m.classify("the cat sat", pad_blocks=3)
    assert np.max(np.abs(plain - padded)) < 1e-9


def test_classify_requires_classification_task(vocab):
    m = build(spec_for("sdd", vocab), seed=14)
    with pytest.raises(ConfigError):
        m.classify("oops")

import numpy as np
import pytest

from blockpool import tensor as T
from blockpool.errors import LengthError
from blockpool.rng import Rng, rng_normal
from blockpool.tensor import Tensor
from blockpool.transformer import (
    ModelConfig,
    build_block_causal_mask,
    decode,
    encode,
    init_decoder_params,
    init_encoder_params,
    sinusoidal_positions,
    tiny_preset,
    transformer_base,
)

from gradcheck import check_grads


def small_cfg(**kw):
    base = dict(d_model=16, n_heads=2, n_enc_layers=2, n_dec_layers=2, d_ff=24, dropout=0.0)
    base.update(kw)
    return ModelConfig(**base)


def test_mask_n1():
    assert build_block_causal_mask(1).tolist() == [[True]]


def test_mask_n2():
    assert build_block_causal_mask(2).tolist() == [[True, False], [True, True]]


def test_mask_matches_bruteforce():
    n = 5
    m = build_block_causal_mask(n)
    for i in range(n):
        for j in range(n):
            assert m[i, j] == (j <= i)


def test_presets():
    base = transformer_base()
    assert (base.d_model, base.n_heads, base.d_ff) == (512, 8, 2048)
    assert base.max_positions == 2048
    tiny = tiny_preset()
    assert tiny.d_model == 32 and tiny.dropout == 0.0


def test_zero_layers_is_identity_plus_positions():
    cfg = small_cfg(n_enc_layers=0)
    x = rng_normal(Rng(50), (4, 16))
    out = encode(Tensor(x), None, cfg, {})
    assert np.allclose(out.data, x + sinusoidal_positions(4, 16))


def test_position_overflow_names_limit():
    cfg = small_cfg(max_positions=3)
    x = Tensor(rng_normal(Rng(51), (4, 16)))
    with pytest.raises(LengthError, match="max_positions=3"):
        encode(x, None, cfg, init_encoder_params(cfg, Rng(52)))


def test_padding_equivalence_encoder():
    cfg = small_cfg()
    params = init_encoder_params(cfg, Rng(53))
    x = rng_normal(Rng(54), (5, 16))
    plain = encode(Tensor(x), None, cfg, params).data

    padded = np.concatenate([x, rng_normal(Rng(55), (3, 16))], axis=0)
    mask = np.array([False] * 5 + [True] * 3)
    out = encode(Tensor(padded), mask, cfg, params).data
    assert np.max(np.abs(out[:5] - plain)) <= 1e-9


def test_decoder_block_causality_bitwise():
    cfg = small_cfg()
    enc_p = init_encoder_params(cfg, Rng(56))
    dec_p = init_decoder_params(cfg, Rng(57))
    src = encode(Tensor(rng_normal(Rng(58), (4, 16))), None, cfg, enc_p)

    tgt1 = rng_normal(Rng(59), (6, 16))
    mask = build_block_causal_mask(6)
    out1 = decode(Tensor(tgt1), src, mask, None, cfg, dec_p).data
    tgt2 = tgt1.copy()
    tgt2[4:] += 123.0  # perturb blocks 4 and 5
    out2 = decode(Tensor(tgt2), src, mask, None, cfg, dec_p).data
    assert np.array_equal(out1[:4], out2[:4])


def test_single_block_target():
    cfg = small_cfg()
    enc_p = init_encoder_params(cfg, Rng(60))
    dec_p = init_decoder_params(cfg, Rng(61))
    src = encode(Tensor(rng_normal(Rng(62), (3, 16))), None, cfg, enc_p)
    out = decode(Tensor(rng_normal(Rng(63), (1, 16))), src, build_block_causal_mask(1), None, cfg, dec_p)
    assert out.data.shape == (1, 16)


def test_attention_rows_sum_to_one():
    # softmax on masked scores: checked through the op the stack uses
    x = Tensor(rng_normal(Rng(64), (4, 6)))
    mask = np.ones((4, 6), dtype=bool)
    mask[:, 5] = False
    probs = T.softmax(x, axis=-1, mask=mask).data
    assert np.all(np.abs(probs.sum(axis=1) - 1.0) < 1e-9)


def test_end_to_end_gradients():
    cfg = small_cfg()
    enc_p = init_encoder_params(cfg, Rng(65))
    dec_p = init_decoder_params(cfg, Rng(66))
    src_emb = Tensor(rng_normal(Rng(67), (3, 16)), requires_grad=True)
    tgt_emb = Tensor(rng_normal(Rng(68), (4, 16)), requires_grad=True)
    mask = build_block_causal_mask(4)
    w = Tensor(rng_normal(Rng(69), (4, 16)))

    def fn():
        enc = encode(src_emb, None, cfg, enc_p)
        dec = decode(tgt_emb, enc, mask, None, cfg, dec_p)
        return T.sum_t(T.mul(dec, w))

    params = {"src": src_emb, "tgt": tgt_emb}
    params.update({f"e.{k}": v for k, v in enc_p.items()})
    params.update({f"d.{k}": v for k, v in dec_p.items()})
    check_grads(fn, params, sample=6, rng=np.random.default_rng(0))

import numpy as np
import pytest

from blockpool.errors import DimensionError, LengthError
from blockpool.rng import Rng, rng_normal
from blockpool.segmenter import BOS, EOS, EOW
from blockpool.tensor import Tensor
from blockpool.upsampler import (
    UpsampleConfig,
    generate_block,
    init_upsampler_params,
    initial_state,
    project_conditioning,
    upsample_train,
)

D_MODEL = 16


def make(variant, **kw):
    base = dict(d_slice=8, lmax_bytes=6, d_char_embed=8, d_lstm=12, k=4)
    base.update(kw)
    cfg = UpsampleConfig(variant=variant, **base)
    params = init_upsampler_params(cfg, D_MODEL, 261, Rng(70))
    return cfg, params


def hiddens(n, seed=71):
    return Tensor(rng_normal(Rng(seed), (n, D_MODEL)))


def test_variable_step_counts():
    cfg, params = make("variable")
    logits, targets = upsample_train(hiddens(2), [[65, 66, 67], [68, 69]], cfg, params)
    assert logits.data.shape[0] == 4 + 3  # lengths [3,2] -> steps [4,3]
    assert targets.tolist() == [65, 66, 67, EOW, 68, 69, EOS]


def test_fixed_step_counts():
    cfg, params = make("fixed", k=4)
    blocks = [[65, 66, 67, 68], [69, 70, 71, EOS]]
    logits, targets = upsample_train(hiddens(2), blocks, cfg, params)
    assert logits.data.shape[0] == 8  # k steps per block
    assert targets.tolist() == [65, 66, 67, 68, 69, 70, 71, EOS]


def test_projection_width_variable():
    cfg, params = make("variable", lmax_bytes=6, d_slice=64)
    params = init_upsampler_params(cfg, D_MODEL, 261, Rng(72))
    assert params["proj.w"].data.shape == (D_MODEL, 448)  # (6+1) * 64


def test_projection_width_fixed():
    cfg, params = make("fixed", k=4, d_slice=64)
    params = init_upsampler_params(cfg, D_MODEL, 261, Rng(73))
    assert params["proj.w"].data.shape == (D_MODEL, 256)  # 4 * 64


def test_repeat_mode_shares_conditioning():
    cfg, params = make("variable", conditioning="repeat")
    cond = project_conditioning(Tensor(rng_normal(Rng(74), (D_MODEL,))), cfg, params)
    assert cond.data.shape == (1, cfg.d_slice)


def test_block_over_cap_rejected():
    cfg, params = make("variable", lmax_bytes=3)
    with pytest.raises(LengthError):
        upsample_train(hiddens(1), [[65, 66, 67, 68]], cfg, params)


def test_hidden_count_mismatch():
    cfg, params = make("variable")
    with pytest.raises(DimensionError):
        upsample_train(hiddens(3), [[65]], cfg, params)


def test_variable_leak_freedom_within_block():
    cfg, params = make("variable")
    h = hiddens(2)
    base, _ = upsample_train(h, [[65, 66, 67], [68, 69]], cfg, params)
    # perturb a later gold byte within block 0: steps 0..1 use only BOS and 65
    pert, _ = upsample_train(h, [[65, 99, 100], [68, 69]], cfg, params)
    assert np.array_equal(base.data[:2], pert.data[:2])


def test_variable_leak_freedom_across_blocks():
    cfg, params = make("variable")
    h = hiddens(2)
    base, _ = upsample_train(h, [[65, 66, 67], [68, 69]], cfg, params)
    pert, _ = upsample_train(h, [[65, 66, 67], [1, 2]], cfg, params)
    assert np.array_equal(base.data[:4], pert.data[:4])  # all of block 0's steps


def test_step_count_law():
    cfg, params = make("variable")
    blocks = [[65], [66, 67, 68], [69, 70]]
    logits, _ = upsample_train(hiddens(3), blocks, cfg, params)
    assert logits.data.shape[0] == sum(len(b) + 1 for b in blocks)

    cfgf, paramsf = make("fixed", k=3)
    fixed_blocks = [[65, 66, 67], [68, 69, 70]]
    logits, _ = upsample_train(hiddens(2), fixed_blocks, cfgf, paramsf)
    assert logits.data.shape[0] == sum(len(b) for b in fixed_blocks)


def test_generate_eow_lover_emits_empty_block():
    cfg, params = make("variable")
    params["out.b"].data[:] = 0.0
    params["out.b"].data[EOW] = 50.0  # logits always favor EOW
    block, why, _ = generate_block(Tensor(rng_normal(Rng(75), (D_MODEL,))), initial_state(cfg), cfg, params)
    assert block == [] and why == "EOW"


def test_generate_fixed_returns_exactly_k():
    cfg, params = make("fixed", k=4)
    block, why, _ = generate_block(
        Tensor(rng_normal(Rng(76), (D_MODEL,))), initial_state(cfg), cfg, params, history=[]
    )
    assert len(block) == 4


def test_generate_cap_termination():
    cfg, params = make("variable", lmax_bytes=3)
    params["out.b"].data[:] = 0.0
    params["out.b"].data[65] = 50.0  # always the byte 'A', never a terminator
    block, why, _ = generate_block(Tensor(rng_normal(Rng(77), (D_MODEL,))), initial_state(cfg), cfg, params)
    assert block == [65, 65, 65] and why == "cap"


def test_one_to_one_single_step_per_block():
    cfg = UpsampleConfig(variant="one_to_one", d_slice=8, d_char_embed=8, d_lstm=12,
                         pad_id=300, bos_id=301, eos_id=302, eow_id=303)
    params = init_upsampler_params(cfg, D_MODEL, 304, Rng(78))
    logits, targets = upsample_train(hiddens(3), [[5], [9], [302]], cfg, params)
    assert logits.data.shape == (3, 304)
    assert targets.tolist() == [5, 9, 302]

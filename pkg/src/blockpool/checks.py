"""Self-contained verification routines behind the `check` CLI subcommands:
mask construction, gradient correctness against central differences, and
leak freedom of the decoder-side pipeline.

Each returns (ok, details) so callers can print one PASS/FAIL line.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .downsampler import DownsampleConfig, block_causal_conv
from .rng import Rng, rng_normal
from .segmenter import EOS
from .subword import train_bpe
from .tensor import Tensor
from .transformer import ModelConfig, build_block_causal_mask
from .upsampler import UpsampleConfig
from .variants import VariantSpec, build

_TINY_CORPUS = [
    "the cat sat on the mat",
    "a dog ran over the hill",
    "birds sing in the morning",
    "fish swim in cold water",
] * 3


def tiny_spec(variant: str = "sdd") -> VariantSpec:
    model = ModelConfig(d_model=32, n_heads=2, n_enc_layers=1, n_dec_layers=1, d_ff=48, dropout=0.0)
    vocab = train_bpe(_TINY_CORPUS, size=300, lmax=5) if variant == "sdd" else None
    down = DownsampleConfig(k=4, d_char=32, conv=[(3, 32), (3, 32)], method=variant)
    up = UpsampleConfig(
        variant="variable" if variant in ("wdd", "sdd") else "fixed",
        d_slice=8,
        lmax_bytes=5,
        d_char_embed=16,
        d_lstm=24,
        k=4,
    )
    return VariantSpec(name=variant, model=model, down=down, up=up, vocab=vocab)


def mask_check() -> tuple[bool, str]:
    """Block-causal masks match the j <= i definition; the masked conv agrees
    with its unmasked/causal limits."""
    for n in range(1, 9):
        m = build_block_causal_mask(n)
        ref = np.array([[j <= i for j in range(n)] for i in range(n)])
        if not np.array_equal(m, ref):
            return False, f"mask mismatch at n={n}"
    r = Rng(101)
    x = Tensor(rng_normal(r, (3, 8)))
    w = Tensor(rng_normal(r, (3, 3, 3)))
    b = Tensor(rng_normal(r, (3,)))
    full = block_causal_conv(x, [8], w, b).data
    same = T.conv1d(x, w, b, mode="same").data
    if not np.array_equal(full, same):
        return False, "single-block conv differs from unmasked same conv"
    singles = block_causal_conv(x, [1] * 8, w, b).data
    causal = T.conv1d(x, Tensor(w.data[:, :, :2].copy()), b, mode="causal").data
    if not np.array_equal(singles, causal):
        return False, "singleton-block conv differs from strict causal conv"
    return True, "mask tables and conv limits agree"


def _fd_max_rel_err(fn, params: dict, h: float = 1e-5, sample: int | None = None, seed: int = 0) -> float:
    """Central-difference comparison for the autodiff gradient of fn()."""
    T.zero_grads(params.values())
    T.backward(fn())
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()}
    order_rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        idxs = range(flat.size)
        if sample is not None and flat.size > sample:
            idxs = order_rng.permutation(flat.size)[:sample]
        aflat = analytic[name].reshape(-1)
        for i in idxs:
            old = flat[i]
            flat[i] = old + h
            up = fn().item()
            flat[i] = old - h
            down = fn().item()
            flat[i] = old
            fd = (up - down) / (2 * h)
            worst = max(worst, abs(aflat[i] - fd) / max(abs(aflat[i]), abs(fd), 1.0))
    return worst


def grad_check(sample: int = 4, tol: float = 1e-4) -> tuple[bool, str]:
    """FD checks over every op plus the end-to-end tiny SDD model."""
    worst_overall = 0.0
    r = Rng(202)

    def p(*shape):
        return Tensor(rng_normal(r, shape) + 0.05, requires_grad=True)

    a, bb = p(3, 4), p(4, 2)
    ops = {
        "matmul": (lambda: T.sum_t(T.mul(T.matmul(a, bb), T.matmul(a, bb))), {"a": a, "b": bb}),
    }
    x = p(3, 5)
    wgt = Tensor(rng_normal(Rng(7), (3, 5)))
    ops["softmax"] = (lambda: T.sum_t(T.mul(T.softmax(x, axis=-1), wgt)), {"x": x})
    ln_x, g_, b_ = p(3, 6), p(6), p(6)
    wln = Tensor(rng_normal(Rng(8), (3, 6)))
    ops["layer_norm"] = (lambda: T.sum_t(T.mul(T.layer_norm(ln_x, g_, b_), wln)), {"x": ln_x, "g": g_, "b": b_})
    cx, cw, cb = p(2, 7), p(3, 2, 3), p(3)
    wc = Tensor(rng_normal(Rng(9), (3, 7)))
    ops["conv1d"] = (lambda: T.sum_t(T.mul(T.conv1d(cx, cw, cb, mode="same"), wc)), {"x": cx, "w": cw, "b": cb})
    lx = p(5, 6)
    ops["cross_entropy"] = (lambda: T.cross_entropy(lx, np.array([0, 2, 1, 5, 3])), {"logits": lx})
    hx, hh, hc = p(3), p(4), p(4)
    wih, whh, bih, bhh = p(16, 3), p(16, 4), p(16), p(16)
    wm = Tensor(rng_normal(Rng(10), (4,)))

    def lstm_fn():
        h2, c2 = T.lstm_cell(hx, hh, hc, wih, whh, bih, bhh)
        return T.sum_t(T.add(T.mul(h2, wm), T.mul(c2, c2)))

    ops["lstm_cell"] = (lstm_fn, {"x": hx, "h": hh, "c": hc, "wih": wih, "whh": whh, "bih": bih, "bhh": bhh})

    for name, (fn, params) in ops.items():
        err = _fd_max_rel_err(fn, params)
        worst_overall = max(worst_overall, err)
        if err >= tol:
            return False, f"op {name}: rel err {err:.2e} >= {tol}"

    # end-to-end tiny SDD model
    spec = tiny_spec("sdd")
    model = build(spec, seed=99)

    def loss_fn():
        loss, _ = model.forward_loss("the cat sat", "a dog ran")
        return loss

    err = _fd_max_rel_err(loss_fn, model.params, sample=sample, seed=3)
    worst_overall = max(worst_overall, err)
    if err >= tol:
        return False, f"end-to-end sdd model: rel err {err:.2e} >= {tol}"
    return True, f"max rel err {worst_overall:.2e} < {tol}"


def leak_check(variant: str = "sdd") -> tuple[bool, str]:
    """Future-block and future-character perturbations must leave earlier
    logits untouched to 0 ulp in float64."""
    spec = tiny_spec(variant)
    model = build(spec, seed=77)
    enc, _ = model.encode_source("the cat sat on a mat")

    if variant in ("sdd", "wdd"):
        gold = [[104, 105], [32, 119, 111], [114, 108], [100, 33]]
        base, _ = model.forward_logits_blocks(enc, gold)
        # (a) perturb every byte of future blocks 2 and 3
        pert = [gold[0], gold[1], [1, 2], [3, 4]]
        out, _ = model.forward_logits_blocks(enc, pert)
        upto = (len(gold[0]) + 1) + (len(gold[1]) + 1)
        if not np.array_equal(base.data[:upto], out.data[:upto]):
            return False, "future-block perturbation leaked into earlier logits"
        # (b) perturb future gold characters within block 1
        pert2 = [gold[0], [32, 1, 2], gold[2], gold[3]]
        out2, _ = model.forward_logits_blocks(enc, pert2)
        upto2 = (len(gold[0]) + 1) + 1  # block 1 step 0 saw only BOS
        if not np.array_equal(base.data[:upto2], out2.data[:upto2]):
            return False, "future-character perturbation leaked into earlier steps"
        return True, "variable-variant perturbations leave earlier logits bit-identical"

    # fixed variant: a block's own gold bytes are invisible to its steps
    gold = [[65, 66, 67, 68], [69, 70, 71, 72], [73, 74, 75, EOS]]
    base, _ = model.forward_logits_blocks(enc, gold)
    pert = [gold[0], [1, 2, 3, 4], gold[2]]
    out, _ = model.forward_logits_blocks(enc, pert)
    if not np.array_equal(base.data[4:8], out.data[4:8]):
        return False, "fixed variant: block's own bytes reached its logits"
    # and future blocks stay invisible too
    pert3 = [gold[0], gold[1], [9, 9, 9, EOS]]
    out3, _ = model.forward_logits_blocks(enc, pert3)
    if not np.array_equal(base.data[:8], out3.data[:8]):
        return False, "fixed variant: future block leaked"
    return True, "fixed-variant structural invariances hold bit-identically"

"""Two-step decoder: each Transformer hidden state conditions a character
LSTM that emits the bytes of one block.

Variable variant: a block of length l takes l+1 steps; step t consumes slice
t of the projected hidden concatenated with the embedding of the previous
character (a block-initial BOS for t=0), and the targets are the block's
bytes followed by EOW (EOS for the final block). Fixed variant: exactly k
steps per block and the previous-character input is the character k steps
back in the flat stream. The 1-to-1 variant emits one subword id per block.

A single LSTM threads its state across the flattened step sequence, so no
information from future blocks can reach earlier steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ArgumentError, ConfigError, DimensionError, LengthError
from .rng import Rng, rng_normal
from .segmenter import BOS, EOS, EOW, NUM_SYMBOLS, PAD, RESERVED
from .tensor import Tensor


@dataclass
class UpsampleConfig:
    variant: str = "variable"  # fixed | variable | one_to_one
    d_slice: int = 64
    lmax_bytes: int = 6  # generation cap and slice budget for the variable variant
    conditioning: str = "slice"  # slice | repeat
    d_char_embed: int = 32
    d_lstm: int = 64
    k: int = 4  # steps per block for the fixed variant
    # symbol ids in the output space; defaults are the byte-level specials
    pad_id: int = PAD
    bos_id: int = BOS
    eos_id: int = EOS
    eow_id: int = EOW

    def validate(self):
        if self.variant not in ("fixed", "variable", "one_to_one"):
            raise ConfigError(f"unknown upsampler variant {self.variant!r}")
        if self.conditioning not in ("slice", "repeat"):
            raise ConfigError(f"conditioning must be slice|repeat, got {self.conditioning!r}")
        if self.lmax_bytes < 1 or self.d_slice < 1 or self.k < 1:
            raise ConfigError("lmax_bytes, d_slice and k must be positive")

    @property
    def n_slices(self) -> int:
        if self.conditioning == "repeat":
            return 1
        if self.variant == "fixed":
            return self.k
        if self.variant == "variable":
            return self.lmax_bytes + 1  # +1 for the end-of-word step
        return 1


def init_upsampler_params(cfg: UpsampleConfig, d_model: int, n_out: int, rng: Rng) -> dict[str, Tensor]:
    cfg.validate()
    params: dict[str, Tensor] = {}
    width = cfg.n_slices * cfg.d_slice
    std = np.sqrt(2.0 / (d_model + width))
    params["proj.w"] = Tensor(rng_normal(rng, (d_model, width), std=std), requires_grad=True)
    params["proj.b"] = Tensor(np.zeros(width), requires_grad=True)
    params["char_embed"] = Tensor(rng_normal(rng, (n_out, cfg.d_char_embed), std=0.05), requires_grad=True)
    d_in = cfg.d_slice + cfg.d_char_embed
    h = cfg.d_lstm
    params["lstm.w_ih"] = Tensor(rng_normal(rng, (4 * h, d_in), std=np.sqrt(1.0 / d_in)), requires_grad=True)
    params["lstm.w_hh"] = Tensor(rng_normal(rng, (4 * h, h), std=np.sqrt(1.0 / h)), requires_grad=True)
    b_ih = np.zeros(4 * h)
    b_ih[h : 2 * h] = 1.0  # forget-gate bias helps memorization
    params["lstm.b_ih"] = Tensor(b_ih, requires_grad=True)
    params["lstm.b_hh"] = Tensor(np.zeros(4 * h), requires_grad=True)
    std_out = np.sqrt(2.0 / (h + n_out))
    params["out.w"] = Tensor(rng_normal(rng, (h, n_out), std=std_out), requires_grad=True)
    params["out.b"] = Tensor(np.zeros(n_out), requires_grad=True)
    return params


def initial_state(cfg: UpsampleConfig) -> tuple[Tensor, Tensor]:
    z = np.zeros(cfg.d_lstm)
    return Tensor(z.copy()), Tensor(z.copy())


def project_conditioning(hidden: Tensor, cfg: UpsampleConfig, params: dict) -> Tensor:
    """Map one d_model hidden to the per-step conditioning matrix.

    slice mode: affine to n_slices*d_slice, reshaped so step t reads row t.
    repeat mode: a single d_slice row that every step shares.
    """
    v = T.add(T.matmul(hidden, params["proj.w"]), params["proj.b"])
    return T.reshape(v, (cfg.n_slices, cfg.d_slice))


def _cond_row(cond: Tensor, t: int, cfg: UpsampleConfig) -> Tensor:
    if cfg.conditioning == "repeat":
        return T.row(cond, 0)
    if t >= cond.data.shape[0]:
        raise DimensionError(f"step index {t} exceeds the {cond.data.shape[0]} conditioning slices")
    return T.row(cond, t)


def _step(char_id: int, cond_vec: Tensor, state, params) -> tuple[Tensor, tuple]:
    h, c = state
    emb = T.row(T.embedding_lookup(params["char_embed"], np.array([char_id])), 0)
    x = T.concat([cond_vec, emb], axis=0)
    h2, c2 = T.lstm_cell(x, h, c, params["lstm.w_ih"], params["lstm.w_hh"], params["lstm.b_ih"], params["lstm.b_hh"])
    logits = T.add(T.matmul(h2, params["out.w"]), params["out.b"])
    return logits, (h2, c2)


def upsample_train(
    decoder_hiddens: Tensor,
    gold_blocks: list[list[int]],
    cfg: UpsampleConfig,
    params: dict,
) -> tuple[Tensor, np.ndarray]:
    """Teacher-forced step logits for the flattened block sequence.

    decoder_hiddens[b] is the Transformer output conditioning gold block b
    (the caller applies the usual one-block shift with a BOS block in front).
    Returns (logits [total_steps, n_out], targets [total_steps]).
    """
    n_blocks = len(gold_blocks)
    if decoder_hiddens.data.shape[0] != n_blocks:
        raise DimensionError(
            f"{decoder_hiddens.data.shape[0]} hiddens cannot condition {n_blocks} blocks"
        )
    if n_blocks == 0:
        raise ArgumentError("no blocks to upsample")

    state = initial_state(cfg)
    rows: list[Tensor] = []
    targets: list[int] = []

    if cfg.variant == "variable":
        for b, block in enumerate(gold_blocks):
            if len(block) > cfg.lmax_bytes:
                raise LengthError(
                    f"block of {len(block)} bytes exceeds lmax_bytes={cfg.lmax_bytes}"
                )
            cond = project_conditioning(T.row(decoder_hiddens, b), cfg, params)
            terminator = cfg.eos_id if b == n_blocks - 1 else cfg.eow_id
            prev = [cfg.bos_id] + list(block)
            tgts = list(block) + [terminator]
            for t in range(len(block) + 1):
                logits, state = _step(prev[t], _cond_row(cond, t, cfg), state, params)
                rows.append(T.reshape(logits, (1, -1)))
                targets.append(tgts[t])

    elif cfg.variant == "fixed":
        stream = [s for block in gold_blocks for s in block]
        pos = 0
        for b, block in enumerate(gold_blocks):
            if len(block) > cfg.k:
                raise LengthError(f"fixed-variant block of {len(block)} bytes exceeds k={cfg.k}")
            cond = project_conditioning(T.row(decoder_hiddens, b), cfg, params)
            for s in range(len(block)):
                prev = stream[pos - cfg.k] if pos - cfg.k >= 0 else cfg.bos_id
                logits, state = _step(prev, _cond_row(cond, s, cfg), state, params)
                rows.append(T.reshape(logits, (1, -1)))
                targets.append(stream[pos])
                pos += 1

    else:  # one_to_one: a block is a single output symbol
        prev = cfg.bos_id
        for b, block in enumerate(gold_blocks):
            if len(block) != 1:
                raise ArgumentError("one_to_one blocks must hold exactly one symbol id")
            cond = project_conditioning(T.row(decoder_hiddens, b), cfg, params)
            logits, state = _step(prev, _cond_row(cond, 0, cfg), state, params)
            rows.append(T.reshape(logits, (1, -1)))
            targets.append(block[0])
            prev = block[0]

    return T.concat(rows, axis=0), np.asarray(targets, dtype=np.intp)


def _allowed_ids(cfg: UpsampleConfig, n_out: int) -> np.ndarray:
    allowed = np.ones(n_out, dtype=bool)
    for sym in (cfg.pad_id, cfg.bos_id):
        if sym < n_out:
            allowed[sym] = False
    if cfg.variant == "fixed" and cfg.eow_id < n_out:
        allowed[cfg.eow_id] = False  # fixed targets never contain EOW
    if cfg.variant != "one_to_one" and RESERVED < n_out:
        allowed[RESERVED] = False
    return allowed


def _greedy(logits: Tensor, allowed: np.ndarray) -> int:
    masked = np.where(allowed, logits.data, -np.inf)
    return int(masked.argmax())


def generate_block(
    hidden: Tensor,
    lstm_state: tuple,
    cfg: UpsampleConfig,
    params: dict,
    history: list[int] | None = None,
    rng: Rng | None = None,
):
    """Greedily emit one block. Returns (symbols, terminated_by, new_state).

    terminated_by is "EOW", "EOS" or "cap" for the variable variant; the
    fixed variant always emits exactly k symbols and reports "EOS" when one of
    them is the EOS id. Decoding is argmax; `rng` is accepted for interface
    parity but greedy search ignores it.
    """
    n_out = params["out.b"].data.shape[0]
    allowed = _allowed_ids(cfg, n_out)
    cond = project_conditioning(hidden, cfg, params)
    state = lstm_state

    if cfg.variant == "variable":
        out: list[int] = []
        prev = cfg.bos_id
        for t in range(cfg.lmax_bytes + 1):
            logits, state = _step(prev, _cond_row(cond, t, cfg), state, params)
            sym = _greedy(logits, allowed)
            if sym == cfg.eow_id:
                return out, "EOW", state
            if sym == cfg.eos_id:
                return out, "EOS", state
            if len(out) == cfg.lmax_bytes:
                # the terminator step declined to terminate: forced cap,
                # the extra symbol is discarded
                return out, "cap", state
            out.append(sym)
            prev = sym
        return out, "cap", state

    if cfg.variant == "fixed":
        out = []
        hist = history if history is not None else []
        for s in range(cfg.k):
            pos = len(hist) + s
            prev = (hist + out)[pos - cfg.k] if pos - cfg.k >= 0 else cfg.bos_id
            logits, state = _step(prev, _cond_row(cond, s, cfg), state, params)
            out.append(_greedy(logits, allowed))
        return out, ("EOS" if cfg.eos_id in out else None), state

    # one_to_one
    prev = history[-1] if history else cfg.bos_id
    logits, state = _step(prev, _cond_row(cond, 0, cfg), state, params)
    sym = _greedy(logits, allowed)
    return [sym], ("EOS" if sym == cfg.eos_id else None), state

"""Downsampling module: byte embeddings -> conv stack -> per-block max pooling.

The encoder variant convolves with free bidirectional context ("same"
padding). The decoder variant masks convolution taps so a position can see
its own block and earlier blocks but nothing from future blocks; combined
with per-block pooling this makes block b's output mathematically independent
of every byte in blocks > b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ArgumentError, ConfigError, DimensionError
from .rng import Rng, rng_normal
from .segmenter import Segmentation
from .tensor import Tensor, _accum, _out


@dataclass
class DownsampleConfig:
    k: int = 4
    d_char: int = 32
    conv: list = field(default_factory=lambda: [(3, 32), (3, 32)])  # (kernel width, channels)
    mode: str = "encoder"
    method: str = "sdd"

    def validate(self, d_model: int):
        if self.mode not in ("encoder", "decoder"):
            raise ConfigError(f"downsampler mode must be encoder|decoder, got {self.mode!r}")
        for width, _ in self.conv:
            if width % 2 == 0:
                raise ConfigError(f"conv kernel widths must be odd, got {width}")
        if self.conv and self.conv[-1][1] != d_model:
            raise ConfigError(
                f"last conv layer has {self.conv[-1][1]} channels, model needs {d_model}"
            )
        if not self.conv and self.d_char != d_model:
            raise ConfigError("without conv layers, d_char must equal d_model")


def init_downsampler_params(cfg: DownsampleConfig, rng: Rng) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    c_in = cfg.d_char
    for i, (width, c_out) in enumerate(cfg.conv):
        std = np.sqrt(2.0 / (width * c_in + c_out))
        params[f"conv{i}.w"] = Tensor(rng_normal(rng, (c_out, c_in, width), std=std), requires_grad=True)
        params[f"conv{i}.b"] = Tensor(np.zeros(c_out), requires_grad=True)
        params[f"conv{i}.ln_g"] = Tensor(np.ones(c_out), requires_grad=True)
        params[f"conv{i}.ln_b"] = Tensor(np.zeros(c_out), requires_grad=True)
        c_in = c_out
    return params


def segment_max_pool(x: Tensor, lengths) -> Tensor:
    """Per-block, per-channel max over a [len, C] tensor -> [blocks, C].

    Gradient flows only to the argmax positions; ties go to the first index.
    """
    lengths = list(lengths)
    if any(l < 1 for l in lengths):
        raise ArgumentError("zero-length block in segment max pooling")
    L, C = x.data.shape
    if sum(lengths) != L:
        raise DimensionError(f"lengths sum to {sum(lengths)} but input has {L} positions")
    starts = np.cumsum([0] + lengths[:-1])
    data = np.empty((len(lengths), C), dtype=x.data.dtype)
    argmax = np.empty((len(lengths), C), dtype=np.intp)
    for b, (s, l) in enumerate(zip(starts, lengths)):
        blockvals = x.data[s : s + l]
        idx = blockvals.argmax(axis=0)  # numpy argmax returns the first maximum
        argmax[b] = s + idx
        data[b] = blockvals[idx, np.arange(C)]

    def bw(g):
        full = np.zeros_like(x.data)
        cols = np.arange(C)
        for b in range(len(lengths)):
            np.add.at(full, (argmax[b], cols), g[b])
        _accum(x, full)

    return _out(data, (x,), bw)


def block_causal_conv(x: Tensor, lengths, w: Tensor, b: Tensor) -> Tensor:
    """Convolution over [Cin, L] where the tap at position j feeds position i
    only if block(j) <= block(i): full context within the block and backward,
    nothing from future blocks."""
    cin, L = x.data.shape
    cout, _, K = w.data.shape
    left = (K - 1) // 2
    right = K - 1 - left

    block_of = np.repeat(np.arange(len(lengths)), lengths)
    if block_of.shape[0] != L:
        raise DimensionError(f"lengths sum to {block_of.shape[0]} but input has {L} positions")

    zeros_l = Tensor(np.zeros((cin, left), dtype=x.data.dtype))
    zeros_r = Tensor(np.zeros((cin, right), dtype=x.data.dtype))
    xp = T.concat([zeros_l, x, zeros_r], axis=1)

    acc = None
    for k in range(K):
        delta = k - left
        tap_w = T.reshape(T.narrow(w, 2, k, 1), (cout, cin))
        contrib = T.matmul(tap_w, T.narrow(xp, 1, k, L))
        if delta > 0:
            # forward taps allowed only within the same block
            shifted = np.full(L, -1, dtype=np.intp)
            shifted[: L - delta] = block_of[delta:]
            mask = (shifted == block_of).astype(x.data.dtype)
            contrib = T.mul(contrib, Tensor(mask))
        acc = contrib if acc is None else T.add(acc, contrib)
    return T.add(acc, T.reshape(b, (cout, 1)))


def downsample(byte_embeddings: Tensor, segmentation: Segmentation, cfg: DownsampleConfig, params: dict) -> Tensor:
    """Run the conv stack over the byte axis, then pool each block.

    byte_embeddings is [len, d_char]; the result is [num_blocks, d_model].
    """
    L = byte_embeddings.data.shape[0]
    if segmentation.total() != L:
        raise DimensionError(
            f"segmentation covers {segmentation.total()} bytes, embeddings have {L}"
        )
    x = byte_embeddings
    c_in = cfg.d_char
    for i, (width, c_out) in enumerate(cfg.conv):
        xT = T.transpose(x, (1, 0))
        if cfg.mode == "decoder":
            h = block_causal_conv(xT, segmentation.lengths, params[f"conv{i}.w"], params[f"conv{i}.b"])
        else:
            h = T.conv1d(xT, params[f"conv{i}.w"], params[f"conv{i}.b"], mode="same")
        a = T.tanh_t(T.transpose(h, (1, 0)))
        if c_in == c_out:
            a = T.add(x, a)  # residual when shapes allow
        x = T.layer_norm(a, params[f"conv{i}.ln_g"], params[f"conv{i}.ln_b"])
        c_in = c_out
    return segment_max_pool(x, segmentation.lengths)

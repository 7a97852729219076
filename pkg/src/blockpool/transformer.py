"""Pre-norm Transformer encoder/decoder operating at block granularity.

Sinusoidal positions (length-extrapolating, deterministic) up to a hard
max_positions budget; attention masks are boolean "allow" matrices so padded
keys and future blocks receive probability exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, LengthError
from .rng import Rng, rng_normal, rng_uniform
from .tensor import Tensor


@dataclass
class ModelConfig:
    d_model: int = 512
    n_heads: int = 8
    n_enc_layers: int = 6
    n_dec_layers: int = 6
    d_ff: int = 2048
    dropout: float = 0.1
    max_positions: int = 2048

    def validate(self):
        if self.d_model % self.n_heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.max_positions < 1:
            raise ConfigError("max_positions must be positive")


def transformer_base() -> ModelConfig:
    return ModelConfig()


def tiny_preset() -> ModelConfig:
    return ModelConfig(d_model=32, n_heads=2, n_enc_layers=1, n_dec_layers=1, d_ff=64, dropout=0.0)


def sinusoidal_positions(n: int, d: int, dtype=np.float64) -> np.ndarray:
    pos = np.arange(n, dtype=dtype)[:, None]
    i = np.arange(0, d, 2, dtype=dtype)[None, :]
    angles = pos / np.power(10000.0, i / d)
    pe = np.zeros((n, d), dtype=dtype)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, : d // 2])
    return pe


def build_block_causal_mask(num_blocks: int) -> np.ndarray:
    """allow[i][j] is True iff block j may attend-feed block i, i.e. j <= i."""
    if num_blocks < 1:
        raise ConfigError("mask needs at least one block")
    return np.tril(np.ones((num_blocks, num_blocks), dtype=bool))


def _init_affine(params, name, d_in, d_out, rng):
    std = np.sqrt(2.0 / (d_in + d_out))
    params[f"{name}.w"] = Tensor(rng_normal(rng, (d_in, d_out), std=std), requires_grad=True)
    params[f"{name}.b"] = Tensor(np.zeros(d_out), requires_grad=True)


def _init_ln(params, name, d):
    params[f"{name}.g"] = Tensor(np.ones(d), requires_grad=True)
    params[f"{name}.b"] = Tensor(np.zeros(d), requires_grad=True)


def _init_attn(params, name, d, rng):
    for proj in ("wq", "wk", "wv", "wo"):
        _init_affine(params, f"{name}.{proj}", d, d, rng)


def init_encoder_params(cfg: ModelConfig, rng: Rng) -> dict[str, Tensor]:
    cfg.validate()
    params: dict[str, Tensor] = {}
    for i in range(cfg.n_enc_layers):
        _init_ln(params, f"l{i}.ln1", cfg.d_model)
        _init_attn(params, f"l{i}.attn", cfg.d_model, rng)
        _init_ln(params, f"l{i}.ln2", cfg.d_model)
        _init_affine(params, f"l{i}.ff1", cfg.d_model, cfg.d_ff, rng)
        _init_affine(params, f"l{i}.ff2", cfg.d_ff, cfg.d_model, rng)
    if cfg.n_enc_layers:
        _init_ln(params, "ln", cfg.d_model)
    return params


def init_decoder_params(cfg: ModelConfig, rng: Rng) -> dict[str, Tensor]:
    cfg.validate()
    params: dict[str, Tensor] = {}
    for i in range(cfg.n_dec_layers):
        _init_ln(params, f"l{i}.ln1", cfg.d_model)
        _init_attn(params, f"l{i}.self", cfg.d_model, rng)
        _init_ln(params, f"l{i}.ln2", cfg.d_model)
        _init_attn(params, f"l{i}.cross", cfg.d_model, rng)
        _init_ln(params, f"l{i}.ln3", cfg.d_model)
        _init_affine(params, f"l{i}.ff1", cfg.d_model, cfg.d_ff, rng)
        _init_affine(params, f"l{i}.ff2", cfg.d_ff, cfg.d_model, rng)
    if cfg.n_dec_layers:
        _init_ln(params, "ln", cfg.d_model)
    return params


def _dropout(x: Tensor, rate: float, train: bool, rng: Rng | None) -> Tensor:
    if not train or rate <= 0.0 or rng is None:
        return x
    keep = (rng_uniform(rng, x.data.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)
    return T.mul(x, Tensor(keep))


def _linear(x: Tensor, params, name: str) -> Tensor:
    return T.add(T.matmul(x, params[f"{name}.w"]), params[f"{name}.b"])


def _attention(x_q: Tensor, x_kv: Tensor | None, allow: np.ndarray, params, name: str, cfg: ModelConfig) -> Tensor:
    if x_kv is None:  # self-attention
        x_kv = x_q
    q = _linear(x_q, params, f"{name}.wq")
    k = _linear(x_kv, params, f"{name}.wk")
    v = _linear(x_kv, params, f"{name}.wv")
    dh = cfg.d_model // cfg.n_heads
    heads = []
    for h in range(cfg.n_heads):
        qh = T.narrow(q, 1, h * dh, dh)
        kh = T.narrow(k, 1, h * dh, dh)
        vh = T.narrow(v, 1, h * dh, dh)
        scores = T.scale(T.matmul(qh, T.transpose(kh, (1, 0))), 1.0 / np.sqrt(dh))
        probs = T.softmax(scores, axis=-1, mask=allow)
        heads.append(T.matmul(probs, vh))
    return _linear(T.concat(heads, axis=1), params, f"{name}.wo")


def _ff(x: Tensor, params, prefix: str) -> Tensor:
    return _linear(T.relu(_linear(x, params, f"{prefix}.ff1")), params, f"{prefix}.ff2")


def _check_positions(n: int, cfg: ModelConfig):
    if n > cfg.max_positions:
        raise LengthError(f"sequence of {n} blocks exceeds max_positions={cfg.max_positions}")


def encode(
    block_embeddings: Tensor,
    pad_mask: np.ndarray | None,
    cfg: ModelConfig,
    params: dict,
    train: bool = False,
    rng: Rng | None = None,
) -> Tensor:
    """Encoder stack over [blocks, d_model]; pad_mask True marks PAD blocks."""
    n, d = block_embeddings.data.shape
    _check_positions(n, cfg)
    x = T.add(block_embeddings, Tensor(sinusoidal_positions(n, d, block_embeddings.data.dtype)))
    if cfg.n_enc_layers == 0:
        return x
    allow = np.ones((n, n), dtype=bool) if pad_mask is None else np.broadcast_to(~pad_mask, (n, n))
    for i in range(cfg.n_enc_layers):
        a = _attention(T.layer_norm(x, params[f"l{i}.ln1.g"], params[f"l{i}.ln1.b"]), x_kv=None, allow=allow, params=params, name=f"l{i}.attn", cfg=cfg)
        x = T.add(x, _dropout(a, cfg.dropout, train, rng))
        f = _ff(T.layer_norm(x, params[f"l{i}.ln2.g"], params[f"l{i}.ln2.b"]), params, f"l{i}")
        x = T.add(x, _dropout(f, cfg.dropout, train, rng))
    return T.layer_norm(x, params["ln.g"], params["ln.b"])


def decode(
    block_embeddings: Tensor,
    encoder_out: Tensor,
    self_mask: np.ndarray,
    cross_pad_mask: np.ndarray | None,
    cfg: ModelConfig,
    params: dict,
    train: bool = False,
    rng: Rng | None = None,
) -> Tensor:
    """Decoder stack; self_mask is a [T, T] boolean allow matrix (block-causal)."""
    n, d = block_embeddings.data.shape
    _check_positions(n, cfg)
    x = T.add(block_embeddings, Tensor(sinusoidal_positions(n, d, block_embeddings.data.dtype)))
    if cfg.n_dec_layers == 0:
        return x
    s = encoder_out.data.shape[0]
    cross_allow = (
        np.ones((n, s), dtype=bool) if cross_pad_mask is None else np.broadcast_to(~cross_pad_mask, (n, s))
    )
    for i in range(cfg.n_dec_layers):
        a = _attention(T.layer_norm(x, params[f"l{i}.ln1.g"], params[f"l{i}.ln1.b"]), x_kv=None, allow=self_mask, params=params, name=f"l{i}.self", cfg=cfg)
        x = T.add(x, _dropout(a, cfg.dropout, train, rng))
        c = _attention(
            T.layer_norm(x, params[f"l{i}.ln2.g"], params[f"l{i}.ln2.b"]),
            x_kv=encoder_out,
            allow=cross_allow,
            params=params,
            name=f"l{i}.cross",
            cfg=cfg,
        )
        x = T.add(x, _dropout(c, cfg.dropout, train, rng))
        f = _ff(T.layer_norm(x, params[f"l{i}.ln3.g"], params[f"l{i}.ln3.b"]), params, f"l{i}")
        x = T.add(x, _dropout(f, cfg.dropout, train, rng))
    return T.layer_norm(x, params["ln.g"], params["ln.b"])

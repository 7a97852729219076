"""Assembly of the comparable systems: subword and char baselines, the four
downsampled models, the two-step-subword ablation, and the encoder-only
classifier head.

All variants share the same Transformer core for a given ModelConfig; they
differ only in embeddings and the downsampling/upsampling modules, so
parameter differences stay outside the core.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .downsampler import DownsampleConfig, downsample, init_downsampler_params
from .errors import ArgumentError, ConfigError, DecodeError
from .rng import Rng, rng_normal
from .segmenter import (
    BOS,
    EOS,
    EOW,
    NUM_SYMBOLS,
    PAD,
    ByteSeq,
    Segmentation,
    detokenize,
    encode_text,
    segment_buffered_fixed,
    segment_fixed,
    segment_sdd,
    segment_wdd,
)
from .subword import SubwordVocab
from .tensor import Tensor
from .transformer import (
    ModelConfig,
    build_block_causal_mask,
    decode,
    encode,
    init_decoder_params,
    init_encoder_params,
)
from .upsampler import (
    UpsampleConfig,
    generate_block,
    init_upsampler_params,
    initial_state,
    upsample_train,
)

DOWNSAMPLED = ("fixed", "buffered_fixed", "wdd", "sdd")
VARIANTS = ("subword", "char") + DOWNSAMPLED + ("two_step_subword",)


@dataclass
class VariantSpec:
    name: str
    task: str = "translation"  # translation | classification
    model: ModelConfig = field(default_factory=ModelConfig)
    down: DownsampleConfig | None = None
    up: UpsampleConfig | None = None
    vocab: SubwordVocab | None = None
    labels: list[str] | None = None

    def validate(self):
        if self.name not in VARIANTS:
            raise ConfigError(f"unknown variant {self.name!r}")
        if self.task not in ("translation", "classification"):
            raise ConfigError(f"unknown task {self.task!r}")
        self.model.validate()
        if self.name in ("subword", "two_step_subword", "sdd") and self.vocab is None:
            raise ConfigError(f"variant {self.name!r} requires a subword vocabulary")
        if self.name in DOWNSAMPLED:
            if self.down is None:
                raise ConfigError(f"variant {self.name!r} requires a downsampler config")
            if self.task == "translation" and self.up is None:
                raise ConfigError(f"variant {self.name!r} requires an upsampler config")
        if self.name in ("subword", "char") and (self.down is not None or self.up is not None):
            raise ConfigError(f"variant {self.name!r} takes no down/upsampler")
        if self.name == "two_step_subword":
            if self.up is None or self.up.variant != "one_to_one":
                raise ConfigError("two_step_subword needs a one_to_one upsampler")
        if self.task == "classification" and not self.labels:
            raise ConfigError("classification requires a label list")


def _subword_special_ids(vocab: SubwordVocab) -> tuple[int, int, int, int]:
    """(n_out, pad, bos, eos) for the subword output space."""
    p = vocab.size
    return p + 3, p, p + 1, p + 2


def scoped(params: dict, prefix: str) -> dict:
    p = prefix + "."
    return {k[len(p):]: v for k, v in params.items() if k.startswith(p)}


class Model:
    """A built variant: parameter store plus the full per-sentence pipelines."""

    def __init__(self, spec: VariantSpec, params: dict[str, Tensor]):
        self.spec = spec
        self.params = params

    # ---------- construction ----------

    @staticmethod
    def build(spec: VariantSpec, seed: int) -> "Model":
        spec.validate()
        rng = Rng(seed)
        cfg = spec.model
        d = cfg.d_model
        params: dict[str, Tensor] = {}

        def emb(name, n, width, std):
            params[name] = Tensor(rng_normal(rng, (n, width), std=std), requires_grad=True)

        if spec.name in ("subword", "two_step_subword"):
            n_out, _, _, _ = _subword_special_ids(spec.vocab)
            emb("src_embed", n_out, d, 1.0 / np.sqrt(d))
        elif spec.name == "char":
            emb("src_embed", NUM_SYMBOLS, d, 1.0 / np.sqrt(d))
        else:
            emb("byte_embed", NUM_SYMBOLS, spec.down.d_char, 0.05)
            spec.down.validate(d)
            enc_down = DownsampleConfig(**{**spec.down.__dict__, "mode": "encoder"})
            params.update({f"enc_down.{k}": v for k, v in init_downsampler_params(enc_down, rng).items()})

        for k, v in init_encoder_params(cfg, rng).items():
            params[f"enc.{k}"] = v

        if spec.task == "translation":
            for k, v in init_decoder_params(cfg, rng).items():
                params[f"dec.{k}"] = v
            if spec.name in DOWNSAMPLED:
                dec_down = DownsampleConfig(**{**spec.down.__dict__, "mode": "decoder"})
                params.update({f"dec_down.{k}": v for k, v in init_downsampler_params(dec_down, rng).items()})
                for k, v in init_upsampler_params(spec.up, d, NUM_SYMBOLS, rng).items():
                    params[f"ups.{k}"] = v
            elif spec.name == "two_step_subword":
                n_out, pad, bos, eos = _subword_special_ids(spec.vocab)
                spec.up.pad_id, spec.up.bos_id, spec.up.eos_id = pad, bos, eos
                spec.up.eow_id = n_out  # unused; point it out of range
                for k, v in init_upsampler_params(spec.up, d, n_out, rng).items():
                    params[f"ups.{k}"] = v
            else:
                n_out = _subword_special_ids(spec.vocab)[0] if spec.name == "subword" else NUM_SYMBOLS
                std = np.sqrt(2.0 / (d + n_out))
                params["out.w"] = Tensor(rng_normal(rng, (d, n_out), std=std), requires_grad=True)
                params["out.b"] = Tensor(np.zeros(n_out), requires_grad=True)
        else:
            n_labels = len(spec.labels)
            std = np.sqrt(2.0 / (d + n_labels))
            params["cls.w"] = Tensor(rng_normal(rng, (d, n_labels), std=std), requires_grad=True)
            params["cls.b"] = Tensor(np.zeros(n_labels), requires_grad=True)

        return Model(spec, params)

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def num_params(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def core_shapes(self) -> dict[str, tuple]:
        """Shapes of the Transformer core only (embeddings and down/up excluded)."""
        return {
            k: tuple(v.data.shape)
            for k, v in sorted(self.params.items())
            if k.startswith(("enc.", "dec."))
        }

    # ---------- source side ----------

    def source_segmentation(self, text: str) -> tuple[ByteSeq, Segmentation]:
        name = self.spec.name
        if name == "fixed":
            seq = encode_text(text, add_bos_eos=True)
            return seq, segment_fixed(seq, self.spec.down.k)
        if name == "buffered_fixed":
            return segment_buffered_fixed(text, self.spec.down.k)
        if name == "wdd":
            seq = encode_text(text, add_bos_eos=True)
            return seq, segment_wdd(seq)
        if name == "sdd":
            seq = encode_text(text, add_bos_eos=True)
            return seq, segment_sdd(seq, self.spec.vocab)
        if name == "char":
            seq = encode_text(text, add_bos_eos=True)
            return seq, Segmentation((1,) * len(seq), method="fixed", k=1)
        raise ConfigError(f"{name} has no byte-level source segmentation")

    def source_block_embeddings(self, text: str, add_specials: bool = True) -> Tensor:
        """Pre-Transformer block representations for the encoder."""
        name = self.spec.name
        d = self.spec.model.d_model
        if name in ("subword", "two_step_subword"):
            _, _, bos, eos = _subword_special_ids(self.spec.vocab)
            ids = self.spec.vocab.tokenize_ids(text)
            if add_specials:
                ids = [bos] + ids + [eos]
            return T.scale(T.embedding_lookup(self.params["src_embed"], np.array(ids, dtype=np.intp)), np.sqrt(d))
        if name == "char":
            seq = encode_text(text, add_bos_eos=add_specials)
            return T.scale(T.embedding_lookup(self.params["src_embed"], np.array(seq.symbols, dtype=np.intp)), np.sqrt(d))
        if add_specials:
            seq, seg = self.source_segmentation(text)
        else:
            seq = encode_text(text)
            if name == "fixed":
                seg = segment_fixed(seq, self.spec.down.k)
            elif name == "buffered_fixed":
                seq, seg = segment_buffered_fixed(text, self.spec.down.k)
            elif name == "wdd":
                seg = segment_wdd(seq)
            else:
                seg = segment_sdd(seq, self.spec.vocab)
        emb = T.embedding_lookup(self.params["byte_embed"], np.array(seq.symbols, dtype=np.intp))
        cfg = DownsampleConfig(**{**self.spec.down.__dict__, "mode": "encoder"})
        return downsample(emb, seg, cfg, scoped(self.params, "enc_down"))

    def encode_source(self, text: str, pad_blocks: int = 0):
        """Encoder output [S, d] and pad mask; pad_blocks appends masked PAD blocks."""
        blocks = self.source_block_embeddings(text)
        pad_mask = None
        if pad_blocks:
            if self.spec.name in ("subword", "two_step_subword"):
                pad_id = _subword_special_ids(self.spec.vocab)[1]
                pad_emb = T.scale(
                    T.embedding_lookup(self.params["src_embed"], np.full(pad_blocks, pad_id, dtype=np.intp)),
                    np.sqrt(self.spec.model.d_model),
                )
            elif self.spec.name == "char":
                pad_emb = T.scale(
                    T.embedding_lookup(self.params["src_embed"], np.full(pad_blocks, PAD, dtype=np.intp)),
                    np.sqrt(self.spec.model.d_model),
                )
            else:
                emb = T.embedding_lookup(self.params["byte_embed"], np.full(pad_blocks, PAD, dtype=np.intp))
                cfg = DownsampleConfig(**{**self.spec.down.__dict__, "mode": "encoder"})
                pad_emb = downsample(
                    emb, Segmentation((1,) * pad_blocks, method="fixed", k=1), cfg, scoped(self.params, "enc_down")
                )
            blocks = T.concat([blocks, pad_emb], axis=0)
            pad_mask = np.array([False] * (blocks.data.shape[0] - pad_blocks) + [True] * pad_blocks)
        out = encode(blocks, pad_mask, self.spec.model, scoped(self.params, "enc"))
        return out, pad_mask

    # ---------- target side (training) ----------

    def target_blocks(self, text: str) -> list[list[int]]:
        """Gold target blocks as byte/symbol lists, upsampler-ready."""
        name = self.spec.name
        if name == "sdd":
            return [list(p) for p in self.spec.vocab.tokenize(text)]
        if name == "wdd":
            seq = encode_text(text)
            seg = segment_wdd(seq)
            out, pos = [], 0
            for l in seg.lengths:
                out.append(list(seq.symbols[pos : pos + l]))
                pos += l
            return out
        if name in ("fixed", "buffered_fixed"):
            if name == "fixed":
                stream = list(encode_text(text).symbols) + [EOS]
                lengths = segment_fixed(ByteSeq(tuple(stream)), self.spec.down.k).lengths
            else:
                seq, seg = segment_buffered_fixed(text, self.spec.down.k)
                stream, lengths = list(seq.symbols), seg.lengths
            out, pos = [], 0
            for l in lengths:
                out.append(stream[pos : pos + l])
                pos += l
            return out
        raise ConfigError(f"{name} does not produce byte blocks")

    def _decoder_hiddens(self, enc_out: Tensor, dec_blocks: list[list[int]], cross_pad_mask=None) -> Tensor:
        """Run the block-causal decoder over [BOS-block] + dec_blocks."""
        syms = [BOS] + [s for b in dec_blocks for s in b]
        lengths = (1,) + tuple(len(b) for b in dec_blocks)
        emb = T.embedding_lookup(self.params["byte_embed"], np.array(syms, dtype=np.intp))
        cfg = DownsampleConfig(**{**self.spec.down.__dict__, "mode": "decoder"})
        seg = Segmentation(lengths, method=self.spec.name if self.spec.name in ("wdd", "sdd") else "fixed",
                           k=self.spec.down.k, lmax=getattr(self.spec.vocab, "lmax", None))
        blocks = downsample(emb, seg, cfg, scoped(self.params, "dec_down"))
        mask = build_block_causal_mask(blocks.data.shape[0])
        return decode(blocks, enc_out, mask, cross_pad_mask, self.spec.model, scoped(self.params, "dec"))

    def forward_logits(self, src_text: str, tgt_text: str):
        """Teacher-forced logits and integer targets for one sentence pair."""
        name = self.spec.name
        enc_out, _ = self.encode_source(src_text)

        if name in ("subword", "char"):
            if name == "subword":
                _, _, bos, eos = _subword_special_ids(self.spec.vocab)
                y = self.spec.vocab.tokenize_ids(tgt_text) + [eos]
            else:
                bos, eos = BOS, EOS
                y = list(tgt_text.encode("utf-8")) + [eos]
            dec_in = [bos] + y[:-1]
            emb = T.scale(
                T.embedding_lookup(self.params["src_embed"], np.array(dec_in, dtype=np.intp)),
                np.sqrt(self.spec.model.d_model),
            )
            mask = build_block_causal_mask(len(dec_in))
            hid = decode(emb, enc_out, mask, None, self.spec.model, scoped(self.params, "dec"))
            logits = T.add(T.matmul(hid, self.params["out.w"]), self.params["out.b"])
            return logits, np.asarray(y, dtype=np.intp)

        if name == "two_step_subword":
            n_out, _, bos, eos = _subword_special_ids(self.spec.vocab)
            ids = self.spec.vocab.tokenize_ids(tgt_text)
            dec_in = [bos] + ids
            emb = T.scale(
                T.embedding_lookup(self.params["src_embed"], np.array(dec_in, dtype=np.intp)),
                np.sqrt(self.spec.model.d_model),
            )
            mask = build_block_causal_mask(len(dec_in))
            hid = decode(emb, enc_out, mask, None, self.spec.model, scoped(self.params, "dec"))
            gold = [[t] for t in ids + [eos]]
            return upsample_train(hid, gold, self.spec.up, scoped(self.params, "ups"))

        gold = self.target_blocks(tgt_text)
        if not gold:  # empty target: a single EOS-only block
            gold = [[]] if self.spec.up.variant == "variable" else [[EOS]]
        return self.forward_logits_blocks(enc_out, gold)

    def forward_logits_blocks(self, enc_out: Tensor, gold_blocks: list[list[int]]):
        """Teacher-forced logits for explicit gold blocks (downsampled variants)."""
        hid = self._decoder_hiddens(enc_out, gold_blocks[:-1])
        return upsample_train(hid, gold_blocks, self.spec.up, scoped(self.params, "ups"))

    def forward_loss(self, src_text: str, tgt_text: str):
        """(summed cross-entropy Tensor, target count) for one pair.

        Per-sentence targets carry no padding, so nothing is ignored here;
        batch-level PAD exclusion lives in the training harness.
        """
        logits, targets = self.forward_logits(src_text, tgt_text)
        loss = T.cross_entropy(logits, targets, ignore_index=-1, reduction="sum")
        return loss, int(targets.size)

    # ---------- classification ----------

    def classify(self, text: str, pad_blocks: int = 0) -> np.ndarray:
        """Label distribution: mean-pooled encoder output through the linear head."""
        if self.spec.task != "classification":
            raise ConfigError("classify requires a classification-task model")
        enc_out, pad_mask = self.encode_source(text, pad_blocks=pad_blocks)
        n = enc_out.data.shape[0]
        if pad_mask is None:
            keep = np.ones(n, dtype=bool)
        else:
            keep = ~pad_mask
        weights = (keep / keep.sum()).astype(enc_out.data.dtype)
        d = enc_out.data.shape[1]
        pooled = T.reshape(T.matmul(T.reshape(Tensor(weights), (1, n)), enc_out), (d,))
        logits = T.add(T.matmul(pooled, self.params["cls.w"]), self.params["cls.b"])
        return T.softmax(logits, axis=-1).data

    def classify_loss(self, text: str, label_idx: int):
        enc_out, _ = self.encode_source(text)
        n, d = enc_out.data.shape
        weights = np.full(n, 1.0 / n, dtype=enc_out.data.dtype)
        pooled = T.reshape(T.matmul(T.reshape(Tensor(weights), (1, n)), enc_out), (d,))
        logits = T.add(T.matmul(pooled, self.params["cls.w"]), self.params["cls.b"])
        loss = T.cross_entropy(T.reshape(logits, (1, -1)), np.array([label_idx]), reduction="sum")
        return loss, 1

    # ---------- inference ----------

    def translate(self, text: str, max_blocks: int = 64):
        with T.no_grad():
            return self._translate_inner(text, max_blocks)

    def _translate_inner(self, text: str, max_blocks: int):
        name = self.spec.name
        enc_out, _ = self.encode_source(text)
        meta = {"truncated": False, "blocks": 0}

        if name in ("subword", "char", "two_step_subword"):
            return self._translate_tokenwise(enc_out, max_blocks, meta)

        ups = scoped(self.params, "ups")
        state = initial_state(self.spec.up)
        gen: list[list[int]] = []
        history: list[int] = []
        while len(gen) < max_blocks:
            dec_blocks = [b if b else [EOW] for b in gen]  # empty block stands in as EOW
            hid = self._decoder_hiddens(enc_out, dec_blocks)
            last = T.row(hid, hid.data.shape[0] - 1)
            block, why, state = generate_block(last, state, self.spec.up, ups, history=history)
            if self.spec.up.variant == "fixed" and EOS in block:
                gen.append(block[: block.index(EOS)])
                meta["blocks"] = len(gen)
                return self._assemble_bytes(gen), meta
            gen.append(block)
            history.extend(block)
            if why == "EOS":
                meta["blocks"] = len(gen)
                return self._assemble_bytes(gen), meta
        meta["truncated"] = True
        meta["blocks"] = len(gen)
        return self._assemble_bytes(gen), meta

    def _assemble_bytes(self, gen_blocks: list[list[int]]) -> str:
        syms = [s for b in gen_blocks for s in b if s < 256]
        raw = bytes(syms)
        if self.spec.name == "buffered_fixed":
            import re

            raw = re.sub(rb" +", b" ", raw).strip(b" ")
        return raw.decode("utf-8", errors="replace")

    def _translate_tokenwise(self, enc_out: Tensor, max_blocks: int, meta: dict):
        name = self.spec.name
        if name == "char":
            bos, eos, pad = BOS, EOS, PAD
            n_out = NUM_SYMBOLS
        else:
            n_out, pad, bos, eos = _subword_special_ids(self.spec.vocab)
        allowed = np.ones(n_out, dtype=bool)
        allowed[[pad, bos]] = False
        if name == "char":
            allowed[[EOW, 260]] = False

        ids: list[int] = []
        state = initial_state(self.spec.up) if name == "two_step_subword" else None
        d = self.spec.model.d_model
        for _ in range(max_blocks):
            dec_in = [bos] + ids
            emb = T.scale(
                T.embedding_lookup(self.params["src_embed"], np.array(dec_in, dtype=np.intp)),
                np.sqrt(d),
            )
            mask = build_block_causal_mask(len(dec_in))
            hid = decode(emb, enc_out, mask, None, self.spec.model, scoped(self.params, "dec"))
            last = T.row(hid, len(dec_in) - 1)
            if name == "two_step_subword":
                block, why, state = generate_block(last, state, self.spec.up, scoped(self.params, "ups"), history=ids)
                sym = block[0]
            else:
                logits = T.add(T.matmul(last, self.params["out.w"]), self.params["out.b"])
                sym = int(np.where(allowed, logits.data, -np.inf).argmax())
            if sym == eos:
                meta["blocks"] = len(ids)
                return self._ids_to_text(ids), meta
            ids.append(sym)
        meta["truncated"] = True
        meta["blocks"] = len(ids)
        return self._ids_to_text(ids), meta

    def _ids_to_text(self, ids: list[int]) -> str:
        if self.spec.name == "char":
            return bytes(i for i in ids if i < 256).decode("utf-8", errors="replace")
        pieces = self.spec.vocab.pieces
        raw = b"".join(pieces[i] for i in ids if i < len(pieces))
        return raw.decode("utf-8", errors="replace")


def spec_to_dict(spec: VariantSpec) -> dict:
    """JSON-safe serialization of a variant spec, vocabulary included."""
    from .subword import _escape

    d = {
        "name": spec.name,
        "task": spec.task,
        "model": dict(spec.model.__dict__),
        "down": dict(spec.down.__dict__) if spec.down else None,
        "up": dict(spec.up.__dict__) if spec.up else None,
        "labels": list(spec.labels) if spec.labels else None,
        "vocab": None,
    }
    if spec.vocab is not None:
        d["vocab"] = {
            "pieces": [_escape(p) for p in spec.vocab.pieces[256:]],
            "merges": [list(m) for m in spec.vocab.merges],
            "lmax": spec.vocab.lmax,
            "word_marker": spec.vocab.word_marker,
        }
    return d


def spec_from_dict(d: dict) -> VariantSpec:
    from .subword import SubwordVocab, _unescape

    vocab = None
    if d.get("vocab"):
        v = d["vocab"]
        pieces = [bytes([i]) for i in range(256)] + [_unescape(s, 0) for s in v["pieces"]]
        vocab = SubwordVocab(pieces, [tuple(m) for m in v["merges"]], v["lmax"], v["word_marker"])
    down = DownsampleConfig(**{**d["down"], "conv": [tuple(c) for c in d["down"]["conv"]]}) if d.get("down") else None
    up = UpsampleConfig(**d["up"]) if d.get("up") else None
    return VariantSpec(
        name=d["name"],
        task=d["task"],
        model=ModelConfig(**d["model"]),
        down=down,
        up=up,
        vocab=vocab,
        labels=d.get("labels"),
    )


def build(spec: VariantSpec, seed: int = 0) -> Model:
    return Model.build(spec, seed)


def translate(model: Model, source_text: str, max_blocks: int = 64):
    return model.translate(source_text, max_blocks=max_blocks)


def classify(model: Model, text: str) -> np.ndarray:
    return model.classify(text)

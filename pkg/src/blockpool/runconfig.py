"""Line-oriented run configuration: `section.key = value`, UTF-8, one pair
per line, `#` comments. Unknown keys are rejected and every run echoes the
fully resolved configuration."""

from __future__ import annotations

from dataclasses import dataclass

from .downsampler import DownsampleConfig
from .errors import ConfigError
from .subword import load_vocab
from .training import TrainConfig, desk_preset, paper_preset
from .transformer import ModelConfig, tiny_preset, transformer_base
from .upsampler import UpsampleConfig
from .variants import DOWNSAMPLED, VARIANTS, VariantSpec

_STR = ("variant", "task", "labels", "data.src", "data.tgt", "data.dev_src", "data.dev_tgt",
        "data.labeled", "data.dev_labeled", "vocab.path", "out.dir", "model.preset",
        "train.preset", "train.eval_metric", "upsampler.conditioning", "downsampler.conv")
_INT = ("seed", "model.d_model", "model.n_heads", "model.n_enc_layers", "model.n_dec_layers",
        "model.d_ff", "model.max_positions", "downsampler.k", "downsampler.d_char",
        "upsampler.d_slice", "upsampler.lmax_bytes", "upsampler.d_char_embed", "upsampler.d_lstm",
        "train.batch_size", "train.grad_accum", "train.warmup_steps", "train.patience",
        "train.max_steps", "train.validate_every", "train.max_blocks")
_FLOAT = ("model.dropout", "train.lr", "train.beta1", "train.beta2", "train.weight_decay")

KNOWN_KEYS = frozenset(_STR) | frozenset(_INT) | frozenset(_FLOAT)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {i}: expected `key = value`")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source} line {i}: unknown key {key!r}")
        out[key] = value
    return out


def parse_config(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as f:
        return parse_config_text(f.read(), source=str(path))


def apply_overrides(cfg: dict[str, str], overrides: list[str]) -> dict[str, str]:
    merged = dict(cfg)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"override uses unknown key {key!r}")
        merged[key] = value
    return merged


def _typed(cfg: dict[str, str]) -> dict:
    typed: dict = {}
    for k, v in cfg.items():
        if k in _INT:
            typed[k] = int(v)
        elif k in _FLOAT:
            typed[k] = float(v)
        else:
            typed[k] = v
    return typed


def _parse_conv(text: str, d_model: int) -> list[tuple[int, int]]:
    """e.g. `3x32,3x32`; `d` as the channel count means d_model."""
    layers = []
    for part in text.split(","):
        w, c = part.lower().split("x")
        layers.append((int(w), d_model if c == "d" else int(c)))
    return layers


@dataclass
class RunSetup:
    spec: VariantSpec
    train: TrainConfig
    values: dict  # fully resolved typed keys, for the echo log
    out_dir: str | None


def resolve_run(cfg_raw: dict[str, str]) -> RunSetup:
    cfg = _typed(cfg_raw)
    if "seed" not in cfg:
        raise ConfigError("config must set `seed`")
    if "variant" not in cfg:
        raise ConfigError("config must set `variant`")
    name = cfg["variant"]
    if name == "buffixed":
        name = "buffered_fixed"
    if name not in VARIANTS:
        raise ConfigError(f"unknown variant {name!r}")
    task = cfg.get("task", "translation")

    model = tiny_preset() if cfg.get("model.preset", "tiny") == "tiny" else transformer_base()
    for field in ("d_model", "n_heads", "n_enc_layers", "n_dec_layers", "d_ff", "max_positions"):
        key = f"model.{field}"
        if key in cfg:
            setattr(model, field, cfg[key])
    if "model.dropout" in cfg:
        model.dropout = cfg["model.dropout"]

    vocab = None
    if "vocab.path" in cfg:
        vocab = load_vocab(cfg["vocab.path"])

    down = None
    up = None
    if name in DOWNSAMPLED:
        k = cfg.get("downsampler.k", 4)
        d_char = cfg.get("downsampler.d_char", model.d_model)
        conv_text = cfg.get("downsampler.conv", f"3x{model.d_model},3x{model.d_model}")
        down = DownsampleConfig(k=k, d_char=d_char, conv=_parse_conv(conv_text, model.d_model), method=name)
        if task == "translation":
            lmax_default = vocab.lmax if (name == "sdd" and vocab) else 16
            up = UpsampleConfig(
                variant="fixed" if name in ("fixed", "buffered_fixed") else "variable",
                d_slice=cfg.get("upsampler.d_slice", 64),
                lmax_bytes=cfg.get("upsampler.lmax_bytes", lmax_default),
                conditioning=cfg.get("upsampler.conditioning", "slice"),
                d_char_embed=cfg.get("upsampler.d_char_embed", 32),
                d_lstm=cfg.get("upsampler.d_lstm", model.d_model),
                k=k,
            )
    elif name == "two_step_subword":
        up = UpsampleConfig(
            variant="one_to_one",
            d_slice=cfg.get("upsampler.d_slice", 64),
            d_char_embed=cfg.get("upsampler.d_char_embed", 32),
            d_lstm=cfg.get("upsampler.d_lstm", model.d_model),
        )

    labels = cfg["labels"].split(",") if "labels" in cfg else None
    spec = VariantSpec(name=name, task=task, model=model, down=down, up=up, vocab=vocab, labels=labels)

    train = desk_preset() if cfg.get("train.preset", "desk") == "desk" else paper_preset()
    for field in ("batch_size", "grad_accum", "warmup_steps", "patience", "max_steps",
                  "validate_every", "max_blocks"):
        key = f"train.{field}"
        if key in cfg:
            setattr(train, field, cfg[key])
    for field in ("lr", "beta1", "beta2", "weight_decay"):
        key = f"train.{field}"
        if key in cfg:
            setattr(train, field, cfg[key])
    if "train.eval_metric" in cfg:
        train.eval_metric = cfg["train.eval_metric"]
    train.seed = cfg["seed"]
    train.validate()
    spec.validate()

    return RunSetup(spec=spec, train=train, values=cfg, out_dir=cfg.get("out.dir"))


def echo_config(setup: RunSetup) -> str:
    lines = [f"{k} = {setup.values[k]}" for k in sorted(setup.values)]
    return "\n".join(lines)

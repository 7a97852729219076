"""Training harness: data ingestion, batching, decoupled-weight-decay Adam
with linear warmup/decay, early stopping, checkpointing, and the TSV metrics
log.

Optimization walks the corpus in a seeded order, accumulates summed
cross-entropy gradients sentence by sentence, scales by the total target
count at step time, and applies AdamW. Because the scale factor is applied
once per step, splitting a batch into grad_accum micro-batches changes
nothing numerically.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ArgumentError, ConfigError, DataError, TrainingError
from .metrics import accuracy as label_accuracy
from .metrics import bleu
from .rng import Rng
from .tensor import Tensor
from .variants import Model, VariantSpec, build, spec_from_dict, spec_to_dict

CHECKPOINT_MAGIC = b"BPCKPT\x01\n"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    batch_size: int = 128
    grad_accum: int = 4
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    warmup_steps: int = 10000
    patience: int = 10
    max_steps: int = 100000
    seed: int = 0
    eval_metric: str = "bleu"  # bleu | accuracy | loss
    validate_every: int = 0  # steps; 0 validates once per epoch
    max_blocks: int = 64  # generation cap during bleu validation

    def validate(self):
        if self.batch_size % self.grad_accum:
            raise ConfigError(
                f"batch_size {self.batch_size} not divisible by grad_accum {self.grad_accum}"
            )
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be >= 0")
        if self.eval_metric not in ("bleu", "accuracy", "loss"):
            raise ConfigError(f"unknown eval metric {self.eval_metric!r}")


def desk_preset() -> TrainConfig:
    return TrainConfig(batch_size=16, grad_accum=1, lr=2e-3, warmup_steps=200, patience=10, max_steps=2000)


def paper_preset() -> TrainConfig:
    return TrainConfig()


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Linear warmup to cfg.lr at warmup_steps, then linear decay to 0 at max_steps."""
    if cfg.warmup_steps > 0 and step < cfg.warmup_steps:
        return cfg.lr * step / cfg.warmup_steps
    if cfg.max_steps <= cfg.warmup_steps:
        return cfg.lr
    frac = (cfg.max_steps - step) / (cfg.max_steps - cfg.warmup_steps)
    return cfg.lr * max(0.0, frac)


class AdamW:
    """Adam with decoupled weight decay; state keyed by parameter name."""

    def __init__(self, params: dict[str, Tensor], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr: float, grad_scale: float = 1.0):
        self.t += 1
        b1, b2 = self.cfg.beta1, self.cfg.beta2
        for k, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad * grad_scale
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mhat = self.m[k] / (1 - b1**self.t)
            vhat = self.v[k] / (1 - b2**self.t)
            if self.cfg.weight_decay:
                p.data = p.data - lr * self.cfg.weight_decay * p.data
            p.data = p.data - lr * mhat / (np.sqrt(vhat) + 1e-8)


class EarlyStopper:
    """Stop after `patience` validations without improvement."""

    def __init__(self, patience: int, higher_is_better: bool):
        self.patience = patience
        self.sign = 1.0 if higher_is_better else -1.0
        self.best = None
        self.bad = 0

    def update(self, value: float) -> bool:
        """Record a validation value; returns True when training should stop."""
        if self.best is None or value * self.sign > self.best * self.sign:
            self.best = value
            self.bad = 0
            return False
        self.bad += 1
        return self.bad >= self.patience

    @property
    def improved(self) -> bool:
        return self.bad == 0


def mean_loss(logits: Tensor, targets, ignore_index: int = -1) -> Tensor:
    """Mean cross-entropy over non-ignored targets (the spec's loss op)."""
    return T.cross_entropy(logits, targets, ignore_index=ignore_index, reduction="mean")


# ---------- data ----------

def load_parallel(src_path, tgt_path) -> list[tuple[str, str]]:
    with open(src_path, encoding="utf-8") as f:
        src = f.read().splitlines()
    with open(tgt_path, encoding="utf-8") as f:
        tgt = f.read().splitlines()
    if len(src) != len(tgt):
        raise DataError(f"line counts differ: {src_path} has {len(src)}, {tgt_path} has {len(tgt)}")
    return [(s, t) for s, t in zip(src, tgt) if s.strip() and t.strip()]


def load_labeled(path) -> list[tuple[str, str]]:
    """(label, text) pairs from `label<TAB>text` lines."""
    out = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f.read().splitlines(), start=1):
            if not line.strip():
                continue
            if "\t" not in line:
                raise DataError(f"{path} line {i}: expected label<TAB>text")
            label, text = line.split("\t", 1)
            out.append((label, text))
    return out


# ---------- metrics log ----------

class MetricsLog:
    """TSV (step, split, metric, value); values via repr for byte stability."""

    def __init__(self, path=None):
        self.rows: list[tuple] = []
        self.path = path
        if path is not None:
            with open(path, "w", encoding="utf-8") as f:
                f.write("step\tsplit\tmetric\tvalue\n")

    def add(self, step: int, split: str, metric: str, value: float):
        self.rows.append((step, split, metric, value))
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(f"{step}\t{split}\t{metric}\t{value!r}\n")


# ---------- checkpoints ----------

def save_checkpoint(model: Model, path, extra: dict | None = None) -> None:
    """Manifest (version, config, tensor table) + little-endian float payload."""
    names = sorted(model.params)
    manifest = {
        "version": CHECKPOINT_VERSION,
        "spec": spec_to_dict(model.spec),
        "extra": extra or {},
        "tensors": [
            {"name": k, "shape": list(model.params[k].data.shape), "dtype": str(model.params[k].data.dtype)}
            for k in names
        ],
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for k in names:
            arr = model.params[k].data
            f.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes(order="C"))


def load_checkpoint(path, expect_variant: str | None = None) -> Model:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path} is not a checkpoint (bad magic)")
        (blob_len,) = struct.unpack("<Q", f.read(8))
        manifest = json.loads(f.read(blob_len).decode("utf-8"))
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise DataError(
                f"checkpoint version {manifest.get('version')} unsupported (expected {CHECKPOINT_VERSION})"
            )
        spec = spec_from_dict(manifest["spec"])
        if expect_variant is not None and spec.name != expect_variant:
            raise ConfigError(
                f"checkpoint holds variant {spec.name!r}, expected {expect_variant!r}"
            )
        model = build(spec, seed=0)
        for entry in manifest["tensors"]:
            name, shape, dtype = entry["name"], tuple(entry["shape"]), np.dtype(entry["dtype"])
            if name not in model.params:
                raise DataError(f"checkpoint tensor {name!r} unknown to variant {spec.name!r}")
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(count * dtype.itemsize)
            if len(raw) != count * dtype.itemsize:
                raise DataError(f"checkpoint truncated while reading tensor {name!r}")
            model.params[name].data = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).astype(dtype).reshape(shape)
        missing = set(model.params) - {e["name"] for e in manifest["tensors"]}
        if missing:
            raise DataError(f"checkpoint missing tensors: {sorted(missing)}")
    return model


# ---------- evaluation helpers ----------

def teacher_forced_accuracy(model: Model, pairs: list[tuple[str, str]]) -> float:
    """Fraction of gold target symbols the model predicts under teacher forcing."""
    hit = total = 0
    with T.no_grad():
        for src, tgt in pairs:
            logits, targets = model.forward_logits(src, tgt)
            hit += int((logits.data.argmax(axis=1) == targets).sum())
            total += targets.size
    return hit / max(total, 1)


def dev_loss(model: Model, pairs, task: str) -> float:
    total = 0.0
    count = 0
    with T.no_grad():
        for a, b in pairs:
            if task == "classification":
                loss, k = model.classify_loss(b, a)  # pairs are (label_idx, text)
            else:
                loss, k = model.forward_loss(a, b)
            total += loss.item()
            count += k
    return total / max(count, 1)


def _validate(model: Model, dev, cfg: TrainConfig, label_to_idx=None) -> float:
    task = model.spec.task
    if cfg.eval_metric == "loss":
        pairs = [(label_to_idx[l], t) for l, t in dev] if task == "classification" else dev
        return dev_loss(model, pairs, task)
    if task == "classification":
        preds = [model.spec.labels[int(model.classify(t).argmax())] for _, t in dev]
        return label_accuracy(preds, [l for l, _ in dev])
    if cfg.eval_metric == "accuracy":
        return teacher_forced_accuracy(model, dev)
    hyps = [model.translate(s, max_blocks=cfg.max_blocks)[0] for s, _ in dev]
    return bleu(hyps, [t for _, t in dev]).score


@dataclass
class TrainResult:
    model: Model
    best_metric: float
    steps: int
    log: MetricsLog
    stopped_early: bool = False


def train(
    spec: VariantSpec,
    train_data: list[tuple[str, str]],
    dev_data: list[tuple[str, str]],
    cfg: TrainConfig,
    log_path=None,
    checkpoint_path=None,
    quiet: bool = True,
) -> TrainResult:
    """Optimize a freshly built model; returns the best model by dev metric.

    train_data/dev_data are (src, tgt) pairs for translation or (label, text)
    pairs for classification.
    """
    cfg.validate()
    if not train_data:
        raise DataError("no training pairs")
    model = build(spec, seed=cfg.seed)
    opt = AdamW(model.params, cfg)
    log = MetricsLog(log_path)
    rng = Rng(cfg.seed ^ 0x5EED)
    stopper = EarlyStopper(cfg.patience, higher_is_better=cfg.eval_metric != "loss")

    label_to_idx = None
    if spec.task == "classification":
        label_to_idx = {l: i for i, l in enumerate(spec.labels)}
        for label, _ in train_data:
            if label not in label_to_idx:
                raise DataError(f"training label {label!r} not in configured labels")

    order: list[int] = []
    steps_per_epoch = max(1, (len(train_data) + cfg.batch_size - 1) // cfg.batch_size)
    best_params = None
    best_metric = None
    step = 0
    stopped = False

    while step < cfg.max_steps and not stopped:
        if not order:
            order = list(range(len(train_data)))
            rng.shuffle(order)
        take, order = order[: cfg.batch_size], order[cfg.batch_size :]

        T.zero_grads(model.params.values())
        loss_sum = 0.0
        token_sum = 0
        for idx in take:
            a, b = train_data[idx]
            if spec.task == "classification":
                loss, k = model.classify_loss(b, label_to_idx[a])
            else:
                loss, k = model.forward_loss(a, b)
            T.backward(loss)
            loss_sum += loss.item()
            token_sum += k
        if not np.isfinite(loss_sum):
            raise TrainingError(f"non-finite loss at step {step}")
        lr = lr_at(step, cfg)
        opt.step(lr, grad_scale=1.0 / max(token_sum, 1))
        step += 1
        log.add(step, "train", "loss", loss_sum / max(token_sum, 1))

        validate_now = (
            step % cfg.validate_every == 0 if cfg.validate_every else step % steps_per_epoch == 0
        )
        if validate_now and dev_data:
            metric = _validate(model, dev_data, cfg, label_to_idx)
            log.add(step, "dev", cfg.eval_metric, metric)
            stop = stopper.update(metric)
            if stopper.improved:
                best_metric = metric
                best_params = {k: p.data.copy() for k, p in model.params.items()}
            if stop:
                stopped = True

    if best_params is not None:
        for k, p in model.params.items():
            p.data = best_params[k]
    if best_metric is None:
        best_metric = float("nan")
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path, extra={"steps": step, "best_metric": best_metric})
    return TrainResult(model=model, best_metric=best_metric, steps=step, log=log, stopped_early=stopped)

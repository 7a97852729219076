"""Minimal reverse-mode autodiff over numpy arrays.

Exactly the operations the models need, each with a hand-written backward
rule. float64 is the default dtype so finite-difference checks are meaningful;
float32 is available for speed. Tensors are immutable values except for grad
accumulation: backward() adds into .grad and never resets leaf gradients, so
repeated calls accumulate (gradient accumulation relies on this).

Set DEBUG_CHECKS = True to assert every forward output is finite.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, DimensionError, NumericError

DEFAULT_DTYPE = np.float64
DEBUG_CHECKS = False

_grad_enabled = True


class no_grad:
    """Context manager: ops built inside do not record the graph."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            raise ArgumentError("wrap raw arrays, not Tensors")
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating) else DEFAULT_DTYPE
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=DEFAULT_DTYPE))


def _out(data: np.ndarray, parents: tuple, backward) -> Tensor:
    if DEBUG_CHECKS and not np.all(np.isfinite(data)):
        raise NumericError("forward op produced a non-finite value")
    t = Tensor.__new__(Tensor)
    t.data = data
    t.grad = None
    t.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
    if t.requires_grad:
        t._parents = parents
        t._backward = backward
    else:
        t._parents = ()
        t._backward = None
    return t


def _accum(t: Tensor, g: np.ndarray):
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def _sum_to_shape(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def bw(g):
        _accum(a, _sum_to_shape(g, a.data.shape))
        _accum(b, _sum_to_shape(g, b.data.shape))

    return _out(data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data - b.data

    def bw(g):
        _accum(a, _sum_to_shape(g, a.data.shape))
        _accum(b, _sum_to_shape(-g, b.data.shape))

    return _out(data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def bw(g):
        _accum(a, _sum_to_shape(g * b.data, a.data.shape))
        _accum(b, _sum_to_shape(g * a.data, b.data.shape))

    return _out(data, (a, b), bw)


def scale(a: Tensor, s: float) -> Tensor:
    data = a.data * s

    def bw(g):
        _accum(a, g * s)

    return _out(data, (a,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2D x 2D, 1D x 2D, or 2D x 1D matrix product."""
    ad, bd = a.data, b.data
    if ad.shape[-1] != bd.shape[0]:
        raise DimensionError(f"matmul inner dims differ: {ad.shape} x {bd.shape}")
    data = ad @ bd

    def bw(g):
        if ad.ndim == 2 and bd.ndim == 2:
            _accum(a, g @ bd.T)
            _accum(b, ad.T @ g)
        elif ad.ndim == 1 and bd.ndim == 2:
            _accum(a, bd @ g)
            _accum(b, np.outer(ad, g))
        elif ad.ndim == 2 and bd.ndim == 1:
            _accum(a, np.outer(g, bd))
            _accum(b, ad.T @ g)
        else:
            raise DimensionError(f"unsupported matmul ranks: {ad.shape} x {bd.shape}")

    return _out(data, (a, b), bw)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]

    def bw(g):
        start = 0
        for t, s in zip(ts, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(start, start + s)
            _accum(t, g[tuple(idx)])
            start += s

    return _out(data, tuple(ts), bw)


def narrow(t: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis."""
    if start < 0 or start + length > t.data.shape[axis]:
        raise DimensionError(
            f"slice [{start}:{start + length}] out of range for axis {axis} of shape {t.data.shape}"
        )
    idx = [slice(None)] * t.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    data = t.data[idx]

    def bw(g):
        full = np.zeros_like(t.data)
        full[idx] = g
        _accum(t, full)

    return _out(data, (t,), bw)


def row(t: Tensor, i: int) -> Tensor:
    """Row i of a 2D tensor as a 1D tensor."""
    return reshape(narrow(t, 0, i, 1), (t.data.shape[1],))


def reshape(t: Tensor, shape) -> Tensor:
    data = t.data.reshape(shape)

    def bw(g):
        _accum(t, g.reshape(t.data.shape))

    return _out(data, (t,), bw)


def transpose(t: Tensor, axes=None) -> Tensor:
    data = np.transpose(t.data, axes)
    inv = None if axes is None else np.argsort(axes)

    def bw(g):
        _accum(t, np.transpose(g, inv))

    return _out(data, (t,), bw)


def sum_t(t: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = t.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        _accum(t, np.broadcast_to(gg, t.data.shape).copy())

    return _out(data, (t,), bw)


def mean_t(t: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = t.data.size if axis is None else t.data.shape[axis]
    return scale(sum_t(t, axis=axis, keepdims=keepdims), 1.0 / n)


def relu(t: Tensor) -> Tensor:
    keep = t.data > 0
    data = np.where(keep, t.data, 0.0)

    def bw(g):
        _accum(t, g * keep)

    return _out(data, (t,), bw)


def tanh_t(t: Tensor) -> Tensor:
    data = np.tanh(t.data)

    def bw(g):
        _accum(t, g * (1.0 - data * data))

    return _out(data, (t,), bw)


def sigmoid(t: Tensor) -> Tensor:
    data = 1.0 / (1.0 + np.exp(-t.data))

    def bw(g):
        _accum(t, g * data * (1.0 - data))

    return _out(data, (t,), bw)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Rows of `table` selected by integer array `ids` (constants)."""
    ids = np.asarray(ids, dtype=np.intp)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ArgumentError(
            f"embedding id outside [0, {table.data.shape[0]}): {ids.min()}..{ids.max()}"
        )
    data = table.data[ids]

    def bw(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        _accum(table, full)

    return _out(data, (table,), bw)


def softmax(t: Tensor, axis: int = -1, mask=None) -> Tensor:
    """Softmax along `axis`; positions where boolean `mask` is False get
    probability exactly 0 and contribute nothing, bit-for-bit."""
    x = t.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not mask.any(axis=axis).all():
            raise ArgumentError("softmax row with every position masked")
        x = np.where(mask, x, -np.inf)
    mx = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - mx)
    data = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accum(t, data * (g - dot))

    return _out(data, (t,), bw)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-9) -> Tensor:
    """Normalize the last axis to mean 0 / variance 1, then apply affine."""
    d = x.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise DimensionError(f"layer_norm affine shape {gain.data.shape} vs feature dim {d}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gain.data + bias.data

    def bw(g):
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        _accum(x, inv * (dxhat - m1 - xhat * m2))
        axes = tuple(range(g.ndim - 1))
        _accum(gain, (g * xhat).sum(axis=axes))
        _accum(bias, g.sum(axis=axes))

    return _out(data, (x, gain, bias), bw)


def conv1d(x: Tensor, w: Tensor, b: Tensor | None, mode: str = "same") -> Tensor:
    """Channels-first 1D convolution: x [Cin, L], w [Cout, Cin, K], b [Cout].

    mode "same" pads (K-1)//2 left / K-1-(K-1)//2 right; "causal" pads K-1 left.
    """
    cin, L = x.data.shape
    cout, cin_w, K = w.data.shape
    if cin != cin_w:
        raise DimensionError(f"conv1d channels differ: input {x.data.shape}, weight {w.data.shape}")
    if mode == "same":
        left = (K - 1) // 2
    elif mode == "causal":
        left = K - 1
    else:
        raise ArgumentError(f"unknown conv mode {mode!r}")
    right = K - 1 - left
    xp = np.pad(x.data, ((0, 0), (left, right)))
    data = np.zeros((cout, L), dtype=x.data.dtype)
    for k in range(K):
        data += w.data[:, :, k] @ xp[:, k : k + L]
    if b is not None:
        data = data + b.data[:, None]

    def bw(g):
        dxp = np.zeros_like(xp)
        dw = np.zeros_like(w.data)
        for k in range(K):
            dxp[:, k : k + L] += w.data[:, :, k].T @ g
            dw[:, :, k] = g @ xp[:, k : k + L].T
        _accum(x, dxp[:, left : left + L])
        _accum(w, dw)
        if b is not None:
            _accum(b, g.sum(axis=1))

    parents = (x, w) if b is None else (x, w, b)
    return _out(data, parents, bw)


def cross_entropy(logits: Tensor, targets, ignore_index: int = -1, reduction: str = "mean") -> Tensor:
    """Cross-entropy of logits [N, V] against integer targets [N].

    Rows whose target equals ignore_index are excluded. Any other target id
    outside [0, V) is an argument error.
    """
    targets = np.asarray(targets, dtype=np.intp)
    n, v = logits.data.shape
    if targets.shape != (n,):
        raise DimensionError(f"targets shape {targets.shape} vs logits rows {n}")
    valid = targets != ignore_index
    if not valid.any():
        raise ArgumentError("every target is ignore_index; loss undefined")
    tv = targets[valid]
    if tv.min() < 0 or tv.max() >= v:
        raise ArgumentError(f"target id outside [0, {v}): {tv.min()}..{tv.max()}")
    k = int(valid.sum())

    x = logits.data
    mx = x.max(axis=1, keepdims=True)
    e = np.exp(x - mx)
    z = e.sum(axis=1, keepdims=True)
    lse = mx[:, 0] + np.log(z[:, 0])
    picked = x[np.arange(n), np.where(valid, targets, 0)]
    per_row = np.where(valid, lse - picked, 0.0)
    total = per_row.sum()
    data = np.asarray(total / k if reduction == "mean" else total)

    def bw(g):
        gs = float(g) / k if reduction == "mean" else float(g)
        p = e / z
        p[np.arange(n), np.where(valid, targets, 0)] -= 1.0
        p[~valid] = 0.0
        _accum(logits, p * gs)

    return _out(data, (logits,), bw)


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, w_ih: Tensor, w_hh: Tensor, b_ih: Tensor, b_hh: Tensor):
    """One LSTM step. Gate order i, f, g, o; x [D], h and c [H], w_ih [4H, D], w_hh [4H, H]."""
    hsz = h.data.shape[0]
    if w_ih.data.shape[1] != x.data.shape[0] or w_ih.data.shape[0] != 4 * hsz or w_hh.data.shape != (4 * hsz, hsz):
        raise DimensionError(
            f"lstm_cell shapes: x {x.data.shape}, h {h.data.shape}, w_ih {w_ih.data.shape}, w_hh {w_hh.data.shape}"
        )
    z = add(add(matmul(w_ih, x), b_ih), add(matmul(w_hh, h), b_hh))
    i = sigmoid(narrow(z, 0, 0, hsz))
    f = sigmoid(narrow(z, 0, hsz, hsz))
    g = tanh_t(narrow(z, 0, 2 * hsz, hsz))
    o = sigmoid(narrow(z, 0, 3 * hsz, hsz))
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh_t(c_new))
    return h_new, c_new


def backward(loss: Tensor) -> None:
    """Populate grads of everything `loss` depends on. Accumulates into leaves."""
    if loss.data.size != 1:
        raise ArgumentError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))

    # interior nodes start fresh each call; leaf grads accumulate across calls
    for node in topo:
        if node._backward is not None:
            node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params) -> None:
    for p in params:
        p.grad = None

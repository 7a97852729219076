"""Finite-difference gradient oracle, independent of the autodiff path.

Central differences with h=1e-5 in float64. The function under test maps a
dict of parameter Tensors to a scalar Tensor through the ops being checked;
the oracle perturbs raw numpy buffers and never touches backward rules.
"""

import numpy as np

from blockpool import tensor as T


def finite_difference(fn, params, h=1e-5, sample=None, rng=None):
    """Return {name: fd_grad array (or sampled dict idx->value)}."""
    grads = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        if sample is None:
            idxs = range(flat.size)
        else:
            n = min(sample, flat.size)
            order = rng.permutation(flat.size) if rng is not None else np.arange(flat.size)
            idxs = order[:n]
        out = {}
        for i in idxs:
            old = flat[i]
            flat[i] = old + h
            up = fn().item()
            flat[i] = old - h
            down = fn().item()
            flat[i] = old
            out[int(i)] = (up - down) / (2 * h)
        grads[name] = out
    return grads


def check_grads(fn, params, h=1e-5, tol=1e-4, sample=None, rng=None):
    """Compare autodiff grads of fn() against central differences.

    Returns the max relative error seen. Relative error uses
    |a - f| / max(|a|, |f|, 1) so near-zero gradients compare absolutely.
    """
    T.zero_grads(params.values())
    loss = fn()
    T.backward(loss)
    analytic = {name: (p.grad if p.grad is not None else np.zeros_like(p.data)) for name, p in params.items()}
    fd = finite_difference(fn, params, h=h, sample=sample, rng=rng)

    worst = 0.0
    worst_name = None
    for name, entries in fd.items():
        aflat = analytic[name].reshape(-1)
        for i, f in entries.items():
            a = aflat[i]
            err = abs(a - f) / max(abs(a), abs(f), 1.0)
            if err > worst:
                worst, worst_name = err, (name, i, a, f)
    assert worst < tol, f"gradient mismatch at {worst_name}: rel err {worst:.3e}"
    return worst

"""Deterministic random number generation.

SplitMix64: state advances by the golden-gamma constant and the output is a
64-bit finalizer mix. Pure integer arithmetic masked to 64 bits, so the stream
is identical on every platform for a given seed. Draw order is row-major;
normal variates come from Box-Muller pairs.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class Rng:
    """SplitMix64 generator; same seed gives the same stream everywhere."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ArgumentError(f"randint bound must be positive, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items):
        return items[self.randint(len(items))]

    def sample(self, items: list, k: int) -> list:
        """k distinct items, order-stable reservoir-free partial shuffle."""
        if k > len(items):
            raise ArgumentError(f"cannot sample {k} from {len(items)} items")
        pool = list(items)
        out = []
        for _ in range(k):
            out.append(pool.pop(self.randint(len(pool))))
        return out


def rng_uniform(rng: Rng, shape, low: float = 0.0, high: float = 1.0, dtype=np.float64) -> np.ndarray:
    n = int(np.prod(shape)) if shape else 1
    vals = [low + (high - low) * rng.next_float() for _ in range(n)]
    return np.array(vals, dtype=dtype).reshape(shape)


def rng_normal(rng: Rng, shape, std: float = 1.0, dtype=np.float64) -> np.ndarray:
    """Box-Muller pairs in row-major order; std must be positive."""
    if std <= 0:
        raise ArgumentError(f"std must be positive, got {std}")
    n = int(np.prod(shape)) if shape else 1
    vals = []
    while len(vals) < n:
        u1 = rng.next_float()
        u2 = rng.next_float()
        r = np.sqrt(-2.0 * np.log(1.0 - u1))  # 1-u1 keeps the argument in (0, 1]
        vals.append(r * np.cos(2.0 * np.pi * u2))
        vals.append(r * np.sin(2.0 * np.pi * u2))
    return (std * np.array(vals[:n], dtype=dtype)).reshape(shape)

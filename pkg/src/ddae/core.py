"""Dense float64 matrix helpers and the seeded random source.

Matrices are plain ``numpy.ndarray`` objects of dtype float64, C (row-major)
order, with rows = samples and cols = features.
"""
from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError

# Named sub-streams split off a master seed.  Indices are part of the
# reproducibility contract: never renumber.
STREAMS = {
    "init": 0,
    "shuffle": 1,
    "noise": 2,
    "pairs": 3,
    "scoring": 4,
    "split": 5,
}

_U64 = 2**64


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D C-contiguous float64 array."""
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    out = a @ b
    if not np.isfinite(out).all():
        raise NumericError("matmul produced non-finite entries")
    return out


def transpose(a) -> np.ndarray:
    return np.ascontiguousarray(as_matrix(a).T)


class RandomSource:
    """Deterministic random source on top of the Philox4x64 counter generator.

    ``RandomSource(seed)`` and every ``child``/``stream`` derived from it replay
    the same draws on every run.  Sub-streams are keyed through
    ``numpy.random.SeedSequence`` spawn keys, so drawing from one never shifts
    another.  Instances are single-owner and not thread-safe.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        seed = int(seed)
        if not 0 <= seed < _U64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, key={self.key})"

    def child(self, *key: int) -> RandomSource:
        return RandomSource(self.seed, self.key + tuple(key))

    def stream(self, name: str) -> RandomSource:
        return self.child(STREAMS[name])

    def uniform(self, size=None) -> np.ndarray:
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        """Uniform integers on the closed range [low, high]."""
        return self._gen.integers(low, high, size=size, endpoint=True)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def gauss(self, n: int) -> np.ndarray:
        """``n`` standard normal draws by the Box-Muller transform."""
        if n < 1:
            raise ValueError("gauss needs n >= 1")
        half = (n + 1) // 2
        u = self._gen.random((2, half))
        # 1 - u lies in (0, 1], keeping log finite
        r = np.sqrt(-2.0 * np.log1p(-u[0]))
        theta = 2.0 * np.pi * u[1]
        out = np.empty(2 * half)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def gauss_matrix(self, rows: int, cols: int) -> np.ndarray:
        if rows * cols == 0:
            return np.zeros((rows, cols))
        return self.gauss(rows * cols).reshape(rows, cols)

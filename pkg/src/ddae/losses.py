"""Reconstruction and contrastive objectives, their upstream gradients, and pair construction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

# Floor on the latent distance used when dividing by it.
DELTA_FLOOR = 1e-12


def reconstruction_loss(x0, x_hat):
    """Batch mean of ``||x0 - x_hat||^2``.

    Returns ``(value, d_loss/d_x_hat)``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x0.shape != x_hat.shape:
        raise ShapeError(f"x0 {x0.shape} and x_hat {x_hat.shape} differ")
    n = x0.shape[0]
    diff = x_hat - x0
    value = float(np.sum(diff * diff) / n)
    return value, (2.0 / n) * diff


def contrastive_loss(z0, z_partner, y, m):
    """Margin contrastive loss averaged over pairs.

    Pair ``i`` contributes ``delta^2`` when ``y[i] == 0`` and
    ``max(0, m[i] - delta)^2`` when ``y[i] == 1``, with ``delta`` the
    Euclidean distance between the two embeddings.  The hinge kink
    ``delta == m`` takes subgradient 0.

    Returns ``(value, d/d z0, d/d z_partner)``.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    zp = np.asarray(z_partner, dtype=np.float64)
    if z0.shape != zp.shape:
        raise ShapeError(f"embedding shapes differ: {z0.shape} vs {zp.shape}")
    n = z0.shape[0]
    y = np.broadcast_to(np.asarray(y, dtype=np.float64), (n,))
    m = np.broadcast_to(np.asarray(m, dtype=np.float64), (n,))
    if np.any(m <= 0):
        raise ConfigError("contrastive margins must be positive", ["m"])

    diff = z0 - zp
    delta = np.sqrt(np.sum(diff * diff, axis=1))
    hinge = np.maximum(0.0, m - delta)
    per_pair = (1.0 - y) * delta**2 + y * hinge**2
    value = float(per_pair.sum() / n)

    # d/d diff: (1-y)*2*diff  -  y*2*hinge*diff/delta
    coef = 2.0 * (1.0 - y) - 2.0 * y * hinge / np.maximum(delta, DELTA_FLOOR)
    g0 = (coef / n)[:, None] * diff
    return value, g0, -g0


def combined_loss(rec: float, cont: float, alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}", ["alpha"])
    return (1.0 - alpha) * rec + alpha * cont


def dae_corrupt(x0, sigma: float, rng) -> np.ndarray:
    """Fixed-level Gaussian corruption ``x0 + sigma * N(0, I)``."""
    if sigma < 0:
        raise ConfigError("dae_sigma must be non-negative", ["dae_sigma"])
    x0 = np.asarray(x0, dtype=np.float64)
    return x0 + sigma * rng.gauss_matrix(*x0.shape)


@dataclass(frozen=True)
class PairBatch:
    """Row indices into one minibatch plus per-pair labels and margins.

    ``y == 0`` pairs join two distinct clean rows (``partner`` indexes the
    clean batch); ``y == 1`` pairs join a clean row with its own diffused copy
    (``partner`` indexes the noised batch, i.e. the same row).
    """

    anchor: np.ndarray
    partner: np.ndarray
    y: np.ndarray
    t: np.ndarray
    m: np.ndarray

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.y == 0))


def derangement(n: int, rng) -> np.ndarray:
    """Permutation of ``range(n)`` without fixed points (identity-free reshuffle)."""
    if n < 2:
        raise ValueError("a derangement needs at least two elements")
    idx = np.arange(n)
    while True:
        perm = rng.permutation(n)
        if not np.any(perm == idx):
            return perm


def margins(t, T: int) -> np.ndarray:
    return 1.0 + np.asarray(t, dtype=np.float64) / T


def make_pairs(t, T: int, rng) -> PairBatch:
    """Pairs for a minibatch of ``len(t)`` rows: one positive and one negative per row.

    A batch of a single row has no partner to draw, so it yields only its
    negative pair.
    """
    t = np.asarray(t, dtype=np.int64)
    n = t.size
    rows = np.arange(n)
    neg = (rows, rows, np.ones(n), t)
    if n >= 2:
        perm = derangement(n, rng)
        pos = (rows, perm, np.zeros(n), t)
        parts = [np.concatenate(p) for p in zip(pos, neg)]
    else:
        parts = list(neg)
    anchor, partner, y, tt = parts
    return PairBatch(anchor.astype(np.int64), partner.astype(np.int64), y, tt.astype(np.int64), margins(tt, T))

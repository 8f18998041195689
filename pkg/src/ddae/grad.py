"""Reverse-mode gradients for the encoder-decoder and the Adam optimizer."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError, StateError
from .model import ForwardTape, ModelParams, _layer_views


@dataclass(eq=False)
class Gradients:
    """Gradient buffer laid out exactly like ``ModelParams.flat``."""

    config: object
    flat: np.ndarray
    layers: list = field(init=False, repr=False)

    def __post_init__(self):
        self.layers = _layer_views(self.flat, self.config.layer_dims())

    @classmethod
    def zeros_like(cls, params: ModelParams) -> Gradients:
        return cls(params.config, np.zeros_like(params.flat))

    def __iadd__(self, other: Gradients) -> Gradients:
        self.flat += other.flat
        return self


def backward(tape: ForwardTape, d_xhat=None, d_z=None, out: Gradients | None = None) -> Gradients:
    """Accumulate parameter gradients for upstream signals at ``x_hat`` and ``z``.

    Either upstream may be ``None`` (treated as zero).  Gradients are added
    into ``out`` when given, otherwise into a fresh zero buffer.
    """
    params = tape.params
    if tape.version != params.version:
        raise StateError("tape was recorded before the last parameter update")
    cfg = params.config
    n_enc = cfg.n_encoder_layers
    n_hidden = cfg.n_hidden_layers
    slope = cfg.leaky_slope
    if tape.encode_only and d_xhat is not None:
        raise StateError("encode-only tape cannot take a reconstruction gradient")
    n_layers = n_enc if tape.encode_only else len(params.layers)
    if len(tape.pre) != n_layers:
        raise StateError("tape does not match the parameter layout")

    grads = out if out is not None else Gradients.zeros_like(params)
    if d_z is not None:
        d_z = np.asarray(d_z, dtype=np.float64)
        if d_z.shape != (tape.batch, cfg.latent_dim):
            raise ShapeError(f"d_z shape {d_z.shape} != {(tape.batch, cfg.latent_dim)}")
    if d_xhat is not None:
        d_xhat = np.asarray(d_xhat, dtype=np.float64)
        if d_xhat.shape != (tape.batch, cfg.input_dim):
            raise ShapeError(f"d_xhat shape {d_xhat.shape} != {(tape.batch, cfg.input_dim)}")

    g = d_xhat
    for k in range(n_layers - 1, -1, -1):
        if k == n_enc - 1 and d_z is not None:
            g = d_z if g is None else g + d_z
        if g is None:
            continue
        if (k - n_enc if k >= n_enc else k) < n_hidden:
            g = g.copy() if g is d_xhat or g is d_z else g
            np.multiply(g, slope, out=g, where=tape.pre[k] < 0.0)
        dw, db = grads.layers[k]
        dw += tape.inputs[k].T @ g
        db += g.sum(axis=0)
        if k > 0:
            g = g @ params.layers[k][0].T
    return grads


@dataclass(eq=False)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    _buf: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def for_params(cls, params: ModelParams, lr: float = 1e-3, **kw) -> AdamState:
        return cls(np.zeros_like(params.flat), np.zeros_like(params.flat), lr=lr, **kw)


def _first_bad_layer(grads: Gradients) -> int:
    for k, (dw, db) in enumerate(grads.layers):
        if not (np.isfinite(dw).all() and np.isfinite(db).all()):
            return k
    return -1


def adam_step(state: AdamState, params: ModelParams, grads: Gradients) -> None:
    """One bias-corrected Adam update, applied in place to ``params`` and ``state``."""
    g = grads.flat
    if g.shape != params.flat.shape or state.m.shape != g.shape:
        raise ShapeError("gradient, moment and parameter buffers are not congruent")
    # any inf/nan entry makes the sum non-finite; overflow falls through to the exact scan
    if not math.isfinite(float(g.sum())):
        bad = _first_bad_layer(grads)
        if bad >= 0:
            raise NumericError(f"non-finite gradient in layer {bad}")
    if state._buf is None or state._buf.shape != g.shape:
        state._buf = np.empty_like(g)
    tmp = state._buf
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step

    state.m *= b1
    np.multiply(g, 1.0 - b1, out=tmp)
    state.m += tmp
    state.v *= b2
    np.multiply(g, g, out=tmp)
    tmp *= 1.0 - b2
    state.v += tmp
    # p -= lr * (m / c1) / (sqrt(v / c2) + eps)
    np.divide(state.v, c2, out=tmp)
    np.sqrt(tmp, out=tmp)
    tmp += state.eps
    np.divide(state.m, tmp, out=tmp)
    tmp *= state.lr / c1
    params.flat -= tmp
    params.version += 1

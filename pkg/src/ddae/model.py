"""Timestep-conditioned encoder-decoder MLP.

The encoder maps ``x_t (+) e_t`` through ``n_hidden_layers`` LeakyReLU layers
to a linear latent layer; the decoder mirrors the widths back to a linear
reconstruction layer.  All weights and biases live in one flat float64 buffer;
per-layer ``(W, b)`` pairs are views into it, with ``W`` shaped
``(fan_in, fan_out)`` so a layer computes ``h @ W + b``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError, StepIndexError


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    n_hidden_layers: int = 3
    hidden_width: int = 512
    latent_dim: int = 32
    embed_dim: int = 16
    leaky_slope: float = 0.01

    def __post_init__(self):
        problems = []
        if self.input_dim < 1:
            problems.append("input_dim")
        if not 1 <= self.n_hidden_layers <= 5:
            problems.append("n_hidden_layers")
        if not 2 <= self.hidden_width <= 4096:
            problems.append("hidden_width")
        if self.latent_dim < 1:
            problems.append("latent_dim")
        if not 0 <= self.embed_dim <= 512 or self.embed_dim % 2:
            problems.append("embed_dim")
        if not self.leaky_slope >= 0.0:
            problems.append("leaky_slope")
        if problems:
            raise ConfigError(f"invalid model config: {', '.join(problems)}", problems)

    @property
    def n_encoder_layers(self) -> int:
        return self.n_hidden_layers + 1

    def layer_dims(self) -> list[tuple[int, int]]:
        h = [self.hidden_width] * self.n_hidden_layers
        enc = [self.input_dim + self.embed_dim, *h, self.latent_dim]
        dec = [self.latent_dim, *h, self.input_dim]
        return list(zip(enc[:-1], enc[1:])) + list(zip(dec[:-1], dec[1:]))

    def n_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_dims())


def _layer_views(flat: np.ndarray, dims) -> list[tuple[np.ndarray, np.ndarray]]:
    views, pos = [], 0
    for fan_in, fan_out in dims:
        w = flat[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = flat[pos:pos + fan_out]
        pos += fan_out
        views.append((w, b))
    return views


@dataclass(eq=False)
class ModelParams:
    config: ModelConfig
    flat: np.ndarray
    layers: list = field(init=False, repr=False)
    # bumped on every in-place update so stale tapes can be detected
    version: int = 0

    def __post_init__(self):
        if self.flat.shape != (self.config.n_params(),):
            raise ShapeError(f"flat buffer has {self.flat.size} entries, config needs {self.config.n_params()}")
        self.layers = _layer_views(self.flat, self.config.layer_dims())

    @classmethod
    def zeros(cls, config: ModelConfig) -> ModelParams:
        return cls(config, np.zeros(config.n_params()))

    def copy(self) -> ModelParams:
        return ModelParams(self.config, self.flat.copy())

    @property
    def encoder(self):
        return self.layers[: self.config.n_encoder_layers]

    @property
    def decoder(self):
        return self.layers[self.config.n_encoder_layers:]

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "layers": [{"w": w.ravel().tolist(), "b": b.tolist()} for w, b in self.layers],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> ModelParams:
        config = ModelConfig(**doc["config"])
        dims = config.layer_dims()
        if len(doc["layers"]) != len(dims):
            raise ShapeError(f"checkpoint has {len(doc['layers'])} layers, config needs {len(dims)}")
        parts = []
        for k, ((fan_in, fan_out), layer) in enumerate(zip(dims, doc["layers"])):
            if len(layer["w"]) != fan_in * fan_out or len(layer["b"]) != fan_out:
                raise ShapeError(f"layer {k} shape does not match config")
            parts += [layer["w"], layer["b"]]
        return cls(config, np.concatenate([np.asarray(p, dtype=np.float64) for p in parts]))


def glorot_init(cfg: ModelConfig, rng) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    params = ModelParams.zeros(cfg)
    for w, _ in params.layers:
        fan_in, fan_out = w.shape
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        w[...] = (2.0 * rng.uniform(w.shape) - 1.0) * bound
    return params


def sinusoidal_embedding(t, embed_dim: int) -> np.ndarray:
    """Rows ``[sin(t*f_0..f_{h-1}), cos(t*f_0..f_{h-1})]``, ``f_i = 10000^(-2i/embed_dim)``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if embed_dim == 0:
        return np.zeros((t.size, 0))
    if embed_dim % 2:
        raise ConfigError(f"embed_dim must be even, got {embed_dim}", ["embed_dim"])
    half = embed_dim // 2
    freqs = 10000.0 ** (-2.0 * np.arange(half) / embed_dim)
    arg = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(arg), np.cos(arg)], axis=1)


def timestep_embedding(t, T: int, embed_dim: int) -> np.ndarray:
    """Embedding of 1-based step(s) ``t``; a scalar ``t`` gives a 1-D vector."""
    arr = np.asarray(t)
    if arr.size and (arr.min() < 1 or arr.max() > T):
        raise StepIndexError(f"timesteps must lie in [1, {T}]")
    emb = sinusoidal_embedding(arr, embed_dim)
    return emb[0] if arr.ndim == 0 else emb


def leaky_relu(a: np.ndarray, slope: float) -> np.ndarray:
    if 0.0 <= slope <= 1.0:
        return np.maximum(a, slope * a)
    return np.where(a >= 0.0, a, slope * a)


@dataclass(eq=False)
class ForwardTape:
    """Per-layer inputs and pre-activations recorded by :func:`forward`."""

    params: ModelParams
    version: int
    inputs: list
    pre: list
    encode_only: bool
    batch: int


def _encoder_input(config: ModelConfig, x: np.ndarray, t) -> np.ndarray:
    if config.embed_dim == 0:
        return x
    t = np.broadcast_to(np.asarray(t), (x.shape[0],))
    return np.concatenate([x, sinusoidal_embedding(t, config.embed_dim)], axis=1)


def forward(params: ModelParams, x, t, *, encode_only: bool = False, record: bool = True):
    """Run the network on a batch.

    Args:
        params: model weights.
        x: ``(n, input_dim)`` noised inputs.
        t: per-row 1-based timesteps (scalar broadcasts); ignored when
            ``embed_dim == 0``.
        encode_only: stop at the latent layer; ``x_hat`` is then ``None``.
        record: keep the tape needed by ``grad.backward``.

    Returns:
        ``(z, x_hat, tape)``; ``tape`` is ``None`` when ``record`` is false.
    """
    cfg = params.config
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise ShapeError(f"expected (n, {cfg.input_dim}) input, got {x.shape}")
    slope = cfg.leaky_slope
    n_hidden = cfg.n_hidden_layers
    inputs, pre = [], []

    h = _encoder_input(cfg, x, t)
    for i, (w, b) in enumerate(params.encoder):
        a = h @ w + b
        if record:
            inputs.append(h)
            pre.append(a)
        h = leaky_relu(a, slope) if i < n_hidden else a
    z = h

    x_hat = None
    if not encode_only:
        for i, (w, b) in enumerate(params.decoder):
            a = h @ w + b
            if record:
                inputs.append(h)
                pre.append(a)
            h = leaky_relu(a, slope) if i < n_hidden else a
        x_hat = h

    tape = ForwardTape(params, params.version, inputs, pre, encode_only, x.shape[0]) if record else None
    return z, x_hat, tape


def reconstruct(params: ModelParams, x, t) -> np.ndarray:
    return forward(params, x, t, record=False)[1]


def encode(params: ModelParams, x, t) -> np.ndarray:
    return forward(params, x, t, encode_only=True, record=False)[0]

import json
import math

import numpy as np
import pytest

from ddae.core import RandomSource
from ddae.errors import ConfigError, ShapeError, StepIndexError
from ddae.model import (ModelConfig, ModelParams, encode, forward, glorot_init, leaky_relu,
                        sinusoidal_embedding, timestep_embedding)


def test_glorot_bounds_and_zero_biases():
    cfg = ModelConfig(input_dim=9, n_hidden_layers=3, hidden_width=64, latent_dim=8, embed_dim=16)
    p = glorot_init(cfg, RandomSource(0))
    for w, b in p.layers:
        bound = math.sqrt(6.0 / sum(w.shape))
        assert np.abs(w).max() <= bound
        assert np.abs(w).max() > 0.9 * bound
        assert np.all(b == 0.0)


def test_glorot_determinism():
    cfg = ModelConfig(input_dim=4, hidden_width=16, latent_dim=2, embed_dim=2)
    a = glorot_init(cfg, RandomSource(1))
    b = glorot_init(cfg, RandomSource(1))
    c = glorot_init(cfg, RandomSource(2))
    np.testing.assert_array_equal(a.flat, b.flat)
    assert not np.array_equal(a.flat, c.flat)


def test_layer_shapes_chain():
    cfg = ModelConfig(input_dim=9, n_hidden_layers=2, hidden_width=32, latent_dim=4, embed_dim=6)
    dims = cfg.layer_dims()
    assert dims == [(15, 32), (32, 32), (32, 4), (4, 32), (32, 32), (32, 9)]
    p = ModelParams.zeros(cfg)
    assert [w.shape for w, _ in p.layers] == dims
    assert p.flat.size == cfg.n_params()


@pytest.mark.parametrize("bad", [dict(n_hidden_layers=0), dict(n_hidden_layers=6), dict(hidden_width=1),
                                 dict(latent_dim=0), dict(embed_dim=3), dict(embed_dim=514)])
def test_invalid_model_config(bad):
    with pytest.raises(ConfigError):
        ModelConfig(input_dim=3, **bad)


def test_embedding_disabled():
    assert timestep_embedding(5, 10, 0).shape == (0,)
    cfg = ModelConfig(input_dim=3, hidden_width=8, latent_dim=2, embed_dim=0)
    assert cfg.layer_dims()[0] == (3, 8)


def test_embedding_at_zero():
    e = sinusoidal_embedding(0, 8)[0]
    np.testing.assert_array_equal(e[:4], 0.0)
    np.testing.assert_array_equal(e[4:], 1.0)


def test_embedding_direct_evaluation():
    # frequencies 10000^(-2i/4) = 1, 1e-2
    expected = [math.sin(1.0), math.sin(0.01), math.cos(1.0), math.cos(0.01)]
    np.testing.assert_allclose(timestep_embedding(1, 100, 4), expected, rtol=0, atol=1e-15)
    t = 37
    got = timestep_embedding(t, 100, 8)
    freqs = [10000 ** (-2 * i / 8) for i in range(4)]
    np.testing.assert_allclose(got, [math.sin(t * f) for f in freqs] + [math.cos(t * f) for f in freqs], atol=1e-14)


def test_embedding_errors():
    with pytest.raises(ConfigError):
        timestep_embedding(1, 10, 5)
    with pytest.raises(StepIndexError):
        timestep_embedding(11, 10, 4)
    with pytest.raises(StepIndexError):
        timestep_embedding(0, 10, 4)


def test_leaky_relu():
    a = np.array([-2.0, -0.0, 0.0, 3.0])
    np.testing.assert_array_equal(leaky_relu(a, 0.01), [-0.02, 0.0, 0.0, 3.0])
    np.testing.assert_array_equal(leaky_relu(a, 2.0), [-4.0, 0.0, 0.0, 3.0])


def test_zero_params_give_zero_outputs():
    cfg = ModelConfig(input_dim=5, hidden_width=8, latent_dim=3, embed_dim=4)
    z, x_hat, _ = forward(ModelParams.zeros(cfg), np.random.default_rng(0).normal(size=(3, 5)), [1, 2, 3])
    np.testing.assert_array_equal(z, 0.0)
    np.testing.assert_array_equal(x_hat, 0.0)


def test_linear_net_matches_explicit_composition():
    cfg = ModelConfig(input_dim=3, n_hidden_layers=1, hidden_width=5, latent_dim=2, embed_dim=2, leaky_slope=1.0)
    p = glorot_init(cfg, RandomSource(4))
    rng = np.random.default_rng(4)
    p.flat[:] += 0.1 * rng.normal(size=p.flat.size)
    x = rng.normal(size=(4, 3))
    t = np.array([1, 5, 9, 20])
    z, x_hat, _ = forward(p, x, t)
    h = np.concatenate([x, sinusoidal_embedding(t, 2)], axis=1)
    (w1, b1), (w2, b2), (w3, b3), (w4, b4) = p.layers
    z_ref = (h @ w1 + b1) @ w2 + b2
    x_ref = (z_ref @ w3 + b3) @ w4 + b4
    np.testing.assert_allclose(z, z_ref, rtol=0, atol=1e-12)
    np.testing.assert_allclose(x_hat, x_ref, rtol=0, atol=1e-12)


def test_batching_is_row_parallel():
    cfg = ModelConfig(input_dim=4, hidden_width=16, latent_dim=3, embed_dim=4)
    p = glorot_init(cfg, RandomSource(5))
    x = np.random.default_rng(5).normal(size=(2, 4))
    t = np.array([3, 17])
    _, both, _ = forward(p, x, t)
    for i in range(2):
        _, one, _ = forward(p, x[i:i + 1], t[i:i + 1])
        np.testing.assert_allclose(both[i], one[0], rtol=0, atol=1e-13)


def test_forward_deterministic_and_t_invariant_without_embedding():
    cfg = ModelConfig(input_dim=4, hidden_width=16, latent_dim=3, embed_dim=0)
    p = glorot_init(cfg, RandomSource(6))
    x = np.random.default_rng(6).normal(size=(5, 4))
    a = forward(p, x, 1, record=False)[1]
    b = forward(p, x, 77, record=False)[1]
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(encode(p, x, 3), encode(p, x, 40))


def test_forward_shape_error():
    cfg = ModelConfig(input_dim=4, hidden_width=8, latent_dim=2, embed_dim=2)
    with pytest.raises(ShapeError):
        forward(ModelParams.zeros(cfg), np.zeros((2, 5)), 1)


def test_checkpoint_roundtrip_bit_exact():
    cfg = ModelConfig(input_dim=7, n_hidden_layers=2, hidden_width=32, latent_dim=4, embed_dim=8)
    p = glorot_init(cfg, RandomSource(8))
    p.flat[:] += RandomSource(9).gauss(p.flat.size) * 1e-3
    text = json.dumps(p.to_dict())
    q = ModelParams.from_dict(json.loads(text))
    assert q.config == p.config
    assert q.flat.tobytes() == p.flat.tobytes()


def test_checkpoint_layer_mismatch():
    cfg = ModelConfig(input_dim=3, hidden_width=8, latent_dim=2, embed_dim=2)
    doc = ModelParams.zeros(cfg).to_dict()
    doc["layers"][0]["w"] = doc["layers"][0]["w"][:-1]
    with pytest.raises(ShapeError):
        ModelParams.from_dict(doc)

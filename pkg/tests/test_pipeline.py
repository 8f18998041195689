import hashlib
import json

import numpy as np
import pytest

from ddae.core import RandomSource
from ddae.errors import ConfigError, ShapeError
from ddae.model import glorot_init
from ddae.pipeline import (TrainConfig, auto_batch_size, checkpoint_dict, dump_latent, load_checkpoint,
                           model_from_checkpoint, save_checkpoint, score, train)

from conftest import gaussian_blob

SMALL = dict(n_hidden_layers=2, hidden_width=64, latent_dim=8, embed_dim=8)


@pytest.fixture(scope="module")
def blob_model():
    X, _ = gaussian_blob(n_in=200, n_out=0, d=2, seed=3)
    return train(X, TrainConfig(**SMALL, seed=1)), X


@pytest.mark.parametrize("n,expected", [(683, 64), (40, 8), (1, 8), (500000, 8192), (1280, 128), (960, 64)])
def test_auto_batch_size(n, expected):
    # 960/10 = 96 is equidistant from 64 and 128; the smaller power wins
    assert auto_batch_size(n) == expected


def test_train_config_validation():
    for bad in (dict(epochs=0), dict(epochs=101), dict(variant="vae"), dict(alpha=2.0), dict(scheduler="step")):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)
    assert TrainConfig(variant="dae").model_config(4).embed_dim == 0


@pytest.mark.parametrize("variant", ["dae", "ddae", "ddae_c"])
def test_zero_lr_keeps_init(variant):
    X, _ = gaussian_blob(n_in=16, n_out=0, d=3)
    cfg = TrainConfig(**SMALL, variant=variant, epochs=1, batch_size=16, lr=0.0, seed=5)
    m = train(X, cfg)
    init = glorot_init(cfg.model_config(3), RandomSource(5).stream("init"))
    np.testing.assert_array_equal(m.params.flat, init.flat)
    assert len(m.loss_trace) == 1


def test_training_is_deterministic():
    X, _ = gaussian_blob(n_in=50, n_out=5, d=3)
    cfg = TrainConfig(**SMALL, variant="ddae_c", epochs=5, seed=9)
    a, b = train(X, cfg), train(X, cfg)
    assert a.loss_trace == b.loss_trace
    np.testing.assert_array_equal(a.params.flat, b.params.flat)


def test_smoke_convergence(blob_model):
    m, _ = blob_model
    assert len(m.loss_trace) == 100 and np.all(np.isfinite(m.loss_trace))
    assert m.rec_loss_trace[-1] < 0.5 * m.rec_loss_trace[0]


def test_alpha_zero_contrastive_matches_plain():
    X, _ = gaussian_blob(n_in=60, n_out=4, d=3)
    a = train(X, TrainConfig(**SMALL, variant="ddae", epochs=4, seed=2))
    b = train(X, TrainConfig(**SMALL, variant="ddae_c", alpha=0.0, epochs=4, seed=2))
    np.testing.assert_array_equal(a.params.flat, b.params.flat)
    assert a.loss_trace == b.loss_trace


def test_uniform_timestep_sampling():
    draws = RandomSource(0).stream("noise").integers(1, 10, size=100_000)
    freq = np.bincount(draws, minlength=11)[1:] / draws.size
    assert draws.min() == 1 and draws.max() == 10
    sigma = np.sqrt(0.1 * 0.9 / draws.size)
    assert np.all(np.abs(freq - 0.1) < 4 * sigma)


def test_score_invariants(blob_model):
    m, X = blob_model
    before = hashlib.sha256(json.dumps(checkpoint_dict(m)).encode()).hexdigest()
    rep = score(m, X, keep_per_step=True)
    after = hashlib.sha256(json.dumps(checkpoint_dict(m)).encode()).hexdigest()
    assert before == after
    assert rep.per_step.shape == (X.shape[0], m.schedule.T)
    np.testing.assert_allclose(rep.per_step.sum(axis=1), rep.scores, rtol=1e-9, atol=0)
    assert np.all(rep.scores >= 0)
    again = score(m, X, keep_per_step=True)
    np.testing.assert_array_equal(rep.per_step, again.per_step)
    assert score(m, X).per_step is None


def test_score_chunking_and_workers(blob_model):
    m, _ = blob_model
    X = RandomSource(8).gauss_matrix(2100, 2)
    a = score(m, X)
    b = score(m, X, workers=3)
    np.testing.assert_array_equal(a.scores, b.scores)
    # a row's score depends only on its chunk position, not on the rest of the batch
    c = score(m, X[:1024])
    np.testing.assert_array_equal(a.scores[:1024], c.scores)


def test_outlier_scores_above_median(blob_model):
    m, X = blob_model
    rep = score(m, np.vstack([X, np.full((1, 2), 10.0)]))
    assert rep.scores[-1] > np.median(rep.scores[:-1])


def test_single_step_score_is_lone_residual():
    X, _ = gaussian_blob(n_in=30, n_out=0, d=2)
    m = train(X, TrainConfig(**SMALL, diffusion_steps=1, epochs=3))
    rep = score(m, X, keep_per_step=True)
    assert rep.per_step.shape == (30, 1)
    np.testing.assert_array_equal(rep.scores, rep.per_step[:, 0])


def test_dae_scores_single_pass():
    X, _ = gaussian_blob(n_in=30, n_out=0, d=2)
    m = train(X, TrainConfig(**SMALL, variant="dae", epochs=3))
    assert score(m, X, keep_per_step=True).per_step.shape == (30, 1)


def test_score_shape_error(blob_model):
    with pytest.raises(ShapeError):
        score(blob_model[0], np.zeros((3, 5)))


def test_dump_latent(blob_model):
    m, X = blob_model
    X2 = np.vstack([X[:5], X[:5]])
    z = dump_latent(m, X2, 10)
    assert z.shape == (10, 8)
    np.testing.assert_array_equal(z[:5], z[5:])
    with pytest.raises(ConfigError):
        dump_latent(m, X, 0)
    flat = train(X[:20], TrainConfig(n_hidden_layers=1, hidden_width=8, latent_dim=2, embed_dim=0, epochs=1))
    assert dump_latent(flat, X, 3).shape[1] == 2
    np.testing.assert_array_equal(dump_latent(flat, X, 3), dump_latent(flat, X, 77))


def test_checkpoint_round_trip(tmp_path, blob_model):
    m, X = blob_model
    path = tmp_path / "ck.json"
    save_checkpoint(m, path, {"note": "x"})
    m2, doc = load_checkpoint(path)
    assert doc["note"] == "x"
    assert m2.config == m.config
    assert m2.params.flat.tobytes() == m.params.flat.tobytes()
    np.testing.assert_array_equal(m2.schedule.alpha_bar, m.schedule.alpha_bar)
    np.testing.assert_array_equal(score(m2, X).scores, score(m, X).scores)
    bad = checkpoint_dict(m)
    bad["train_config"]["latent_dim"] = 4
    with pytest.raises(ConfigError):
        model_from_checkpoint(bad)

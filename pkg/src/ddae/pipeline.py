"""Training loop for the dae / ddae / ddae_c variants and the anomaly-scoring path."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import schemas
from .core import RandomSource, as_matrix
from .errors import ConfigError, NumericError, ShapeError
from .grad import AdamState, Gradients, adam_step, backward
from .losses import PairBatch, combined_loss, contrastive_loss, dae_corrupt, make_pairs, reconstruction_loss
from .model import ModelConfig, ModelParams, encode, forward, glorot_init, reconstruct
from .schedule import KINDS, NoiseSchedule, build_schedule, forward_diffuse

log = logging.getLogger(__name__)

VARIANTS = ("dae", "ddae", "ddae_c")
CHECKPOINT_SCHEMA_VERSION = 1
# Scoring noise is drawn per fixed-size row chunk, so results do not depend
# on how chunks are spread over workers.
SCORE_CHUNK = 1024


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "ddae"
    scheduler: str = "linear"
    diffusion_steps: int = 100
    beta_min: float = 1e-4
    beta_max: float = 0.02
    cosine_offset: float = 0.008
    n_hidden_layers: int = 3
    hidden_width: int = 512
    latent_dim: int = 32
    embed_dim: int = 16
    leaky_slope: float = 0.01
    lr: float = 1e-3
    alpha: float = 0.5
    epochs: int = 100
    batch_size: int = 0
    dae_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        problems = []
        if self.variant not in VARIANTS:
            problems.append("variant")
        if self.scheduler not in KINDS:
            problems.append("scheduler")
        if not 1 <= self.epochs <= 100:
            problems.append("epochs")
        if self.batch_size < 0:
            problems.append("batch_size")
        if not self.lr >= 0.0:
            problems.append("lr")
        if not 0.0 <= self.alpha <= 1.0:
            problems.append("alpha")
        if not self.dae_sigma >= 0.0:
            problems.append("dae_sigma")
        if not 0 <= self.seed < 2**64:
            problems.append("seed")
        if problems:
            raise ConfigError(f"invalid training config: {', '.join(problems)}", problems)

    @classmethod
    def from_dict(cls, doc: dict) -> TrainConfig:
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in names})

    def to_dict(self) -> dict:
        return asdict(self)

    def model_config(self, input_dim: int) -> ModelConfig:
        return ModelConfig(
            input_dim=input_dim,
            n_hidden_layers=self.n_hidden_layers,
            hidden_width=self.hidden_width,
            latent_dim=self.latent_dim,
            # the fixed-noise baseline has no timestep to condition on
            embed_dim=0 if self.variant == "dae" else self.embed_dim,
            leaky_slope=self.leaky_slope,
        )

    def schedule(self) -> NoiseSchedule:
        return build_schedule(self.scheduler, self.diffusion_steps, self.beta_min, self.beta_max, self.cosine_offset)


@dataclass(eq=False)
class TrainedModel:
    params: ModelParams
    schedule: NoiseSchedule
    config: TrainConfig
    loss_trace: list = field(default_factory=list)
    rec_loss_trace: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        """Number of score terms: T for diffusion variants, 1 for dae."""
        return 1 if self.config.variant == "dae" else self.schedule.T


@dataclass(eq=False)
class ScoreReport:
    scores: np.ndarray
    per_step: np.ndarray | None = None
    labels: np.ndarray | None = None


def auto_batch_size(n: int) -> int:
    """Power of two in 2^3..2^13 closest to n/10, ties to the smaller."""
    if n < 1:
        raise ValueError("dataset size must be positive")
    target = n / 10.0
    return min((2**k for k in range(3, 14)), key=lambda b: (abs(b - target), b))


def _contrastive_grads(params, x0, t, z_t, pairs: PairBatch, alpha, grads):
    """Add the alpha-weighted contrastive gradient of the two clean encodings into ``grads``.

    Returns the contrastive loss and the upstream gradient at ``z_t`` (already
    scaled by alpha), which the caller feeds into the main tape.
    """
    z_clean, _, tape_clean = forward(params, x0, t, encode_only=True)
    pos = pairs.y == 0
    neg = ~pos
    # both members of a positive pair are encoded with the anchor's step
    z_pos, _, tape_pos = forward(params, x0[pairs.partner[pos]], t[pairs.anchor[pos]], encode_only=True)

    partner = np.empty((pairs.y.size, z_t.shape[1]))
    partner[pos] = z_pos
    partner[neg] = z_t[pairs.partner[neg]]
    value, g_anchor, g_partner = contrastive_loss(z_clean[pairs.anchor], partner, pairs.y, pairs.m)

    d_clean = np.zeros_like(z_clean)
    np.add.at(d_clean, pairs.anchor, g_anchor)
    d_t = np.zeros_like(z_t)
    np.add.at(d_t, pairs.partner[neg], g_partner[neg])

    backward(tape_clean, None, alpha * d_clean, out=grads)
    if pos.any():
        backward(tape_pos, None, alpha * g_partner[pos], out=grads)
    return value, alpha * d_t


def batch_objective(params: ModelParams, x0, x_in, t, alpha: float = 0.0, pairs: PairBatch | None = None):
    """Loss and gradients for one minibatch.

    ``x_in`` is the corrupted batch fed to the network and ``x0`` its clean
    target.  With ``pairs`` the contrastive term is blended in with weight
    ``alpha``; without, the objective is reconstruction only.

    Returns ``(total, rec, cont, grads)``; ``cont`` is ``None`` without pairs.
    """
    z_t, x_hat, tape = forward(params, x_in, t)
    rec, d_xhat = reconstruction_loss(x0, x_hat)
    grads = Gradients.zeros_like(params)
    if pairs is None:
        backward(tape, d_xhat, out=grads)
        return rec, rec, None, grads
    cont, d_zt = _contrastive_grads(params, x0, t, z_t, pairs, alpha, grads)
    backward(tape, (1.0 - alpha) * d_xhat, d_zt, out=grads)
    return combined_loss(rec, cont, alpha), rec, cont, grads


def train(X, cfg: TrainConfig) -> TrainedModel:
    """Fit one model on the (standardized) training rows ``X``.

    Each minibatch draws a timestep per row and Gaussian noise, diffuses the
    batch in closed form and takes one Adam step on the reconstruction loss,
    blended with the contrastive loss for ``ddae_c``.  The ``dae`` variant
    corrupts with fixed-level noise instead.

    Randomness is split into independent sub-streams of ``cfg.seed`` (init,
    shuffle, noise, pairs), so ``ddae_c`` with ``alpha=0`` follows the exact
    trajectory of ``ddae``.
    """
    X = as_matrix(X, "X")
    n, d = X.shape
    if n == 0:
        raise ShapeError("training set is empty")
    master = RandomSource(cfg.seed)
    shuffle_rng = master.stream("shuffle")
    noise_rng = master.stream("noise")
    pair_rng = master.stream("pairs")

    params = glorot_init(cfg.model_config(d), master.stream("init"))
    sched = cfg.schedule()
    T = sched.T
    adam = AdamState.for_params(params, lr=cfg.lr)
    bs = cfg.batch_size or auto_batch_size(n)
    alpha = cfg.alpha if cfg.variant == "ddae_c" else 0.0
    model = TrainedModel(params, sched, cfg)

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        tot_sum = rec_sum = 0.0
        for bi, start in enumerate(range(0, n, bs)):
            x0 = X[order[start:start + bs]]
            b = x0.shape[0]
            if cfg.variant == "dae":
                t = np.ones(b, dtype=np.int64)
                x_in = dae_corrupt(x0, cfg.dae_sigma, noise_rng)
            else:
                t = noise_rng.integers(1, T, size=b)
                x_in = forward_diffuse(x0, t, noise_rng.gauss_matrix(b, d), sched)

            pairs = make_pairs(t, T, pair_rng) if cfg.variant == "ddae_c" else None
            total, rec, _, grads = batch_objective(params, x0, x_in, t, alpha, pairs)
            if not np.isfinite(total):
                raise NumericError(f"non-finite loss at epoch {epoch + 1}, batch {bi + 1}")
            adam_step(adam, params, grads)
            tot_sum += total * b
            rec_sum += rec * b
        model.loss_trace.append(tot_sum / n)
        model.rec_loss_trace.append(rec_sum / n)
        log.debug("epoch %d loss %.6g rec %.6g", epoch + 1, tot_sum / n, rec_sum / n)
    return model


def _score_chunk(model: TrainedModel, x0: np.ndarray, rng: RandomSource) -> np.ndarray:
    cfg = model.config
    params = model.params
    m, d = x0.shape
    if cfg.variant == "dae":
        x_hat = reconstruct(params, dae_corrupt(x0, cfg.dae_sigma, rng), 1)
        return np.sum((x0 - x_hat) ** 2, axis=1)[:, None]
    T = model.schedule.T
    out = np.empty((m, T))
    for t in range(1, T + 1):
        x_t = forward_diffuse(x0, t, rng.gauss_matrix(m, d), model.schedule)
        x_hat = reconstruct(params, x_t, t)
        out[:, t - 1] = np.sum((x0 - x_hat) ** 2, axis=1)
    return out


def score(model: TrainedModel, X, keep_per_step: bool = False, labels=None,
          seed: int | None = None, workers: int = 1) -> ScoreReport:
    """Cumulative reconstruction-error anomaly scores.

    Each row's score sums ``||x0 - x_hat(t)||^2`` over every step ``t``,
    with fresh noise per (row, step) from the ``scoring`` sub-stream of
    ``seed`` (default: the training seed).  ``dae`` models score with one
    corrupt-and-reconstruct pass.
    """
    X = as_matrix(X, "X")
    if X.shape[1] != model.params.config.input_dim:
        raise ShapeError(f"expected {model.params.config.input_dim} features, got {X.shape[1]}")
    root = RandomSource(model.config.seed if seed is None else seed).stream("scoring")
    starts = list(range(0, X.shape[0], SCORE_CHUNK))

    def run(ci):
        s = starts[ci]
        return _score_chunk(model, X[s:s + SCORE_CHUNK], root.child(ci))

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(starts))))
    else:
        parts = [run(ci) for ci in range(len(starts))]
    per_step = np.concatenate(parts, axis=0) if parts else np.zeros((0, model.n_steps))
    # sequential sum, identical to the last column of the cumulative curve
    scores = np.cumsum(per_step, axis=1)[:, -1] if per_step.shape[1] else np.zeros(per_step.shape[0])
    lab = None if labels is None else np.asarray(labels)
    return ScoreReport(scores, per_step if keep_per_step else None, lab)


def dump_latent(model: TrainedModel, X, t: int) -> np.ndarray:
    """Latent codes of the clean rows of ``X`` conditioned on step ``t``."""
    if not 1 <= t <= model.schedule.T:
        raise ConfigError(f"t={t} outside [1, {model.schedule.T}]", ["t"])
    X = as_matrix(X, "X")
    return encode(model.params, X, t)


def checkpoint_dict(model: TrainedModel, extra: dict | None = None) -> dict:
    doc = {"schema_version": CHECKPOINT_SCHEMA_VERSION}
    doc.update(model.params.to_dict())
    doc["schedule"] = model.schedule.params()
    doc["train_config"] = model.config.to_dict()
    doc["loss_trace"] = list(model.loss_trace)
    doc["rec_loss_trace"] = list(model.rec_loss_trace)
    if extra:
        doc.update(extra)
    return doc


def model_from_checkpoint(doc: dict) -> TrainedModel:
    cfg = TrainConfig.from_dict(doc["train_config"])
    params = ModelParams.from_dict(doc)
    if params.config != cfg.model_config(params.config.input_dim):
        raise ConfigError("checkpoint model block disagrees with its train_config", ["config"])
    sp = doc["schedule"]
    sched = build_schedule(sp["scheduler"], sp["diffusion_steps"], sp["beta_min"], sp["beta_max"], sp["cosine_offset"])
    return TrainedModel(params, sched, cfg, list(doc.get("loss_trace", [])), list(doc.get("rec_loss_trace", [])))


def save_checkpoint(model: TrainedModel, path, extra: dict | None = None) -> dict:
    doc = checkpoint_dict(model, extra)
    schemas.validate(doc, "checkpoint")
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return doc


def load_checkpoint(path) -> tuple[TrainedModel, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    return model_from_checkpoint(doc), doc


def with_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    return replace(cfg, seed=seed)

"""Diffusion noise schedules and the closed-form forward process.

Timesteps are 1-based at every public entry point (``t`` in ``1..T``); the
tables are stored 0-based, so ``beta[t - 1]`` is the noise level of step ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, ShapeError, StepIndexError

KINDS = ("linear", "cosine", "quadratic", "sigmoid", "exponential")

COSINE_BETA_CLIP = (1e-8, 0.999)
SIGMOID_RANGE = 6.0


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    kind: str
    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray
    beta_min: float
    beta_max: float
    cosine_offset: float

    def params(self) -> dict:
        return {
            "scheduler": self.kind,
            "diffusion_steps": self.T,
            "beta_min": self.beta_min,
            "beta_max": self.beta_max,
            "cosine_offset": self.cosine_offset,
        }


def cosine_signal(t, T: int, s: float):
    """Unnormalised cosine signal curve ``cos^2(((t/T + s)/(1 + s)) * pi/2)``."""
    return np.cos((np.asarray(t, dtype=np.float64) / T + s) / (1.0 + s) * math.pi / 2) ** 2


def _betas(kind: str, T: int, bmin: float, bmax: float, s: float) -> np.ndarray:
    if T == 1 and kind != "cosine":
        return np.array([bmin])
    if kind == "linear":
        return np.linspace(bmin, bmax, T)
    if kind == "quadratic":
        return np.linspace(math.sqrt(bmin), math.sqrt(bmax), T) ** 2
    if kind == "sigmoid":
        u = np.linspace(-SIGMOID_RANGE, SIGMOID_RANGE, T)
        return bmin + (bmax - bmin) / (1.0 + np.exp(-u))
    if kind == "exponential":
        return np.geomspace(bmin, bmax, T)
    if kind == "cosine":
        if T == 1:
            return np.array([bmin])
        f = cosine_signal(np.arange(T + 1), T, s)
        ab = f / f[0]
        return np.clip(1.0 - ab[1:] / ab[:-1], *COSINE_BETA_CLIP)
    raise ConfigError(f"unknown scheduler {kind!r}; expected one of {KINDS}", ["scheduler"])


def build_schedule(
    kind: str = "linear",
    T: int = 100,
    beta_min: float = 1e-4,
    beta_max: float = 0.02,
    cosine_offset: float = 0.008,
) -> NoiseSchedule:
    """Build the beta / alpha-bar tables for one scheduler kind.

    ``beta_min``/``beta_max`` bound every kind except cosine, which follows
    the offset cosine curve and only clips its betas.  ``alpha_bar`` is always
    the running product of ``1 - beta``.
    """
    problems = []
    if kind not in KINDS:
        problems.append("scheduler")
    if not isinstance(T, (int, np.integer)) or isinstance(T, bool) or T < 1:
        problems.append("diffusion_steps")
    if not 0.0 < beta_min < beta_max < 1.0:
        problems.extend(["beta_min", "beta_max"])
    if not cosine_offset >= 0.0:
        problems.append("cosine_offset")
    if problems:
        raise ConfigError(f"invalid schedule parameters: {', '.join(problems)}", problems)

    T = int(T)
    beta = np.ascontiguousarray(_betas(kind, T, float(beta_min), float(beta_max), float(cosine_offset)))
    if not (np.all(beta > 0.0) and np.all(beta < 1.0)):
        raise NumericError(f"{kind} schedule produced beta outside (0, 1)")
    alpha_bar = np.cumprod(1.0 - beta)
    beta.setflags(write=False)
    alpha_bar.setflags(write=False)
    return NoiseSchedule(kind, T, beta, alpha_bar, float(beta_min), float(beta_max), float(cosine_offset))


def _check_steps(t, T: int) -> np.ndarray:
    t = np.asarray(t)
    if t.size and (not np.issubdtype(t.dtype, np.integer) or t.min() < 1 or t.max() > T):
        raise StepIndexError(f"timesteps must be integers in [1, {T}]")
    return t.astype(np.int64)


def signal_strength(sched: NoiseSchedule, t: int) -> float:
    """Retained signal fraction alpha-bar at step ``t``."""
    if not 1 <= t <= sched.T:
        raise StepIndexError(f"t={t} outside [1, {sched.T}]")
    return float(sched.alpha_bar[t - 1])


def forward_diffuse(x0, t, eps, sched: NoiseSchedule) -> np.ndarray:
    """Noise each row of ``x0`` to its own step: sqrt(ab)*x0 + sqrt(1-ab)*eps."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape or x0.ndim != 2:
        raise ShapeError(f"x0 {x0.shape} and eps {eps.shape} must be equal 2-D shapes")
    t = np.broadcast_to(_check_steps(t, sched.T), (x0.shape[0],))
    ab = sched.alpha_bar[t - 1][:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps

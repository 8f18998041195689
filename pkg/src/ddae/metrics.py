"""Ranking metrics for anomaly scores (higher score = more anomalous)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, UndefinedMetricError


def _prepare(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ShapeError(f"{s.size} scores vs {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    if np.isnan(s).any():
        raise ValueError("scores contain NaN")
    return s, y.astype(bool)


def _average_ranks(s: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # start index of each block of equal values
    starts = np.flatnonzero(np.r_[True, sorted_s[1:] != sorted_s[:-1]])
    ends = np.r_[starts[1:], s.size]
    block_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(s.size)
    ranks[order] = np.repeat(block_rank, ends - starts)
    return ranks


def roc_auc(scores, labels) -> float:
    """P(anomaly outscores normal) + 0.5 * P(tie), via the Mann-Whitney rank sum."""
    s, y = _prepare(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC needs both classes")
    rank_sum = _average_ranks(s)[y].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pr_auc(scores, labels) -> float:
    """Average precision with step interpolation.

    Equal scores form one threshold block, so the value does not depend on
    the order of tied samples.
    """
    s, y = _prepare(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("PR-AUC needs at least one positive")
    order = np.argsort(-s, kind="mergesort")
    s_desc = s[order]
    y_desc = y[order]
    # last index of each block of equal scores
    block_end = np.flatnonzero(np.r_[s_desc[1:] != s_desc[:-1], True])
    tp = np.cumsum(y_desc)[block_end]
    seen = block_end + 1
    precision = tp / seen
    recall_gain = np.diff(np.r_[0, tp]) / n_pos
    return float(np.sum(precision * recall_gain))


METRICS = {"pr_auc": pr_auc, "roc_auc": roc_auc}


def per_step_curve(per_step, labels, metric="pr_auc"):
    """Metric of each step's scores and of the running cumulative score.

    Returns ``(per_step_values, cumulative_values)``, each of length ``T``.
    """
    fn = METRICS[metric] if isinstance(metric, str) else metric
    mat = np.asarray(per_step, dtype=np.float64)
    if mat.ndim != 2:
        raise ShapeError("per-step scores must be an n x T matrix")
    cum = np.cumsum(mat, axis=1)
    per = np.array([fn(mat[:, j], labels) for j in range(mat.shape[1])])
    cumulative = np.array([fn(cum[:, j], labels) for j in range(mat.shape[1])])
    return per, cumulative


@dataclass
class MetricSummary:
    pr_auc_mean: float
    pr_auc_std: float
    roc_auc_mean: float
    roc_auc_std: float
    pr_auc: list = field(default_factory=list)
    roc_auc: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pr_auc": {"mean": self.pr_auc_mean, "std": self.pr_auc_std, "per_seed": list(self.pr_auc)},
            "roc_auc": {"mean": self.roc_auc_mean, "std": self.roc_auc_std, "per_seed": list(self.roc_auc)},
        }


def mean_std(values) -> tuple[float, float]:
    """Mean and population standard deviation."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("need at least one value")
    mean = float(v.mean())
    return mean, float(math.sqrt(np.mean((v - mean) ** 2)))


def aggregate_seeds(pr_values, roc_values) -> MetricSummary:
    pm, ps = mean_std(pr_values)
    rm, rs = mean_std(roc_values)
    return MetricSummary(pm, ps, rm, rs, [float(v) for v in pr_values], [float(v) for v in roc_values])

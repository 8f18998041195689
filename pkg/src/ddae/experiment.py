"""Experiment orchestration behind the CLI: train, evaluate, per-step analysis, sweeps, latents."""
from __future__ import annotations

import csv
import datetime as _dt
import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import schemas
from .config import train_config, validate
from .data import Dataset, apply_standardization, load_csv, make_split, resolve_dataset, standardize
from .errors import ConfigError, ShapeError, UndefinedMetricError
from .metrics import METRICS, aggregate_seeds, per_step_curve, pr_auc, roc_auc
from .pipeline import dump_latent, load_checkpoint, save_checkpoint, score, train

log = logging.getLogger(__name__)

RESULT_SCHEMA_VERSION = 1
MODE_NOTES = {
    "unsupervised": "unsupervised: trained and scored on all rows (train = eval)",
    "semi": "semi: trained on half of the normal rows; evaluated on the other half plus all anomalies",
}
# fields that legitimately differ between otherwise identical runs
VOLATILE_KEYS = ("created_at", "wall_time_s")


def _write_json(path, doc):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def prepare_view(ds: Dataset, mode: str, seed: int, scope: str):
    """Split for ``seed`` and standardize; returns ``(standardized ds, split)``."""
    split = make_split(ds, mode, seed)
    std = standardize(ds, split.train if scope == "train" else None)
    return std, split


def _data_block(ds, cfg, seed, std) -> dict:
    return {
        "data": {
            "dataset": ds.name,
            "mode": cfg["mode"],
            "split_seed": seed,
            "standardize_scope": cfg["standardize_scope"],
            "mean": std.mean.tolist(),
            "std": std.std.tolist(),
        }
    }


def write_steps_csv(path, per, cum, alpha_bar, metric: str):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", f"per_step_{metric}", f"cumulative_{metric}", "alpha_bar"])
        for i in range(len(per)):
            w.writerow([i + 1, repr(float(per[i])), repr(float(cum[i])), repr(float(alpha_bar[i]))])


def write_scores_csv(path, rows, scores, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "score", "label"])
        for r, s, y in zip(rows, scores, labels):
            w.writerow([int(r), repr(float(s)), int(y)])


def run_train(cfg: dict) -> str:
    """Train on the first seed's training view and write ``checkpoint.json``."""
    path = resolve_dataset(cfg["dataset"])
    ds = load_csv(path)
    seed = cfg["seeds"][0]
    std, split = prepare_view(ds, cfg["mode"], seed, cfg["standardize_scope"])
    model = train(std.X[split.train], train_config(cfg, seed))
    for epoch, loss in enumerate(model.loss_trace, 1):
        log.info("epoch %d loss %.6g", epoch, loss)
    out = os.path.join(cfg["out_dir"], "checkpoint.json")
    os.makedirs(cfg["out_dir"], exist_ok=True)
    save_checkpoint(model, out, _data_block(ds, cfg, seed, std))
    return out


def _evaluate_seed(ds, cfg, seed, out_dir) -> dict:
    std, split = prepare_view(ds, cfg["mode"], seed, cfg["standardize_scope"])
    model = train(std.X[split.train], train_config(cfg, seed))
    x_eval, y_eval = std.X[split.eval], ds.y[split.eval]
    report = score(model, x_eval, keep_per_step=True, labels=y_eval)
    if not np.allclose(report.per_step.sum(axis=1), report.scores, rtol=1e-9, atol=0):
        raise AssertionError("per-step scores do not sum to the cumulative score")

    seed_dir = f"seed_{seed}"
    os.makedirs(os.path.join(out_dir, seed_dir), exist_ok=True)
    ckpt = os.path.join(seed_dir, "checkpoint.json")
    save_checkpoint(model, os.path.join(out_dir, ckpt), _data_block(ds, cfg, seed, std))
    scores_csv = os.path.join(seed_dir, "scores.csv")
    write_scores_csv(os.path.join(out_dir, scores_csv), split.eval, report.scores, y_eval)

    entry = {
        "seed": seed,
        "n_train": int(split.train.size),
        "n_eval": int(split.eval.size),
        "final_loss": model.loss_trace[-1],
        "pr_auc": None,
        "roc_auc": None,
        "error": None,
        "artifacts": {"checkpoint": ckpt, "scores": scores_csv, "steps": None},
    }
    try:
        entry["pr_auc"] = pr_auc(report.scores, y_eval)
        entry["roc_auc"] = roc_auc(report.scores, y_eval)
    except UndefinedMetricError as exc:
        entry["pr_auc"] = entry["roc_auc"] = None
        entry["error"] = str(exc)
        return entry
    if cfg["variant"] != "dae":
        per, cum = per_step_curve(report.per_step, y_eval, "pr_auc")
        steps_csv = os.path.join(seed_dir, "steps.csv")
        write_steps_csv(os.path.join(out_dir, steps_csv), per, cum, model.schedule.alpha_bar, "pr_auc")
        entry["artifacts"]["steps"] = steps_csv
    return entry


def run_evaluate(cfg: dict) -> dict:
    """Split, train, score and measure once per seed; aggregate and write ``result.json``."""
    started = time.perf_counter()
    path = resolve_dataset(cfg["dataset"])
    ds = load_csv(path)
    out_dir = cfg["out_dir"]
    os.makedirs(out_dir, exist_ok=True)

    per_seed = []
    for seed in cfg["seeds"]:
        entry = _evaluate_seed(ds, cfg, seed, out_dir)
        log.info("seed %d: pr_auc=%s roc_auc=%s", seed, entry["pr_auc"], entry["roc_auc"])
        per_seed.append(entry)

    warnings = []
    valid = [e for e in per_seed if e["error"] is None]
    for e in per_seed:
        if e["error"] is not None:
            msg = f"seed {e['seed']}: metric undefined ({e['error']}); excluded from aggregation"
            log.warning(msg)
            warnings.append(msg)
    summary = None
    if valid:
        summary = aggregate_seeds([e["pr_auc"] for e in valid], [e["roc_auc"] for e in valid]).to_dict()

    echo = {k: v for k, v in cfg.items() if k != "grid"}
    result = {
        "schema_version": RESULT_SCHEMA_VERSION,
        "dataset": ds.name,
        "dataset_path": path,
        "variant": cfg["variant"],
        "mode": cfg["mode"],
        "mode_note": MODE_NOTES[cfg["mode"]],
        "config": echo,
        "seeds": list(cfg["seeds"]),
        "per_seed": per_seed,
        "summary": summary,
        "warnings": warnings,
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "wall_time_s": time.perf_counter() - started,
    }
    schemas.validate(result, "result")
    _write_json(os.path.join(out_dir, "result.json"), result)
    return result


def analyze_steps(checkpoint_path, dataset_ref, metric: str = "pr_auc", out_path=None) -> dict:
    """Per-step and cumulative metric curves for a saved model on its evaluation view.

    The split, standardization and scoring noise are rebuilt from the
    checkpoint, so the last cumulative value reproduces the evaluate metric.
    """
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}", ["metric"])
    model, doc = load_checkpoint(checkpoint_path)
    if model.config.variant == "dae":
        raise ConfigError("per-step analysis needs a diffusion model (variant ddae or ddae_c)", ["variant"])
    ds = load_csv(resolve_dataset(dataset_ref))
    if ds.d != model.params.config.input_dim:
        raise ShapeError(f"dataset has {ds.d} features, checkpoint expects {model.params.config.input_dim}")
    data = doc.get("data")
    if data is not None:
        split = make_split(ds, data["mode"], data["split_seed"])
        std = apply_standardization(ds, data["mean"], data["std"])
        rows = split.eval
    else:
        std = standardize(ds)
        rows = np.arange(ds.n)
    report = score(model, std.X[rows], keep_per_step=True)
    per, cum = per_step_curve(report.per_step, ds.y[rows], metric)
    alpha_bar = model.schedule.alpha_bar
    if out_path:
        write_steps_csv(out_path, per, cum, alpha_bar, metric)
    return {
        "t": list(range(1, len(per) + 1)),
        "per_step": per.tolist(),
        "cumulative": cum.tolist(),
        "alpha_bar": alpha_bar.tolist(),
        "metric": metric,
    }


def export_latent(checkpoint_path, dataset_ref, t: int, out_path=None) -> np.ndarray:
    """Latent codes for every row of a dataset, standardized as at training time."""
    model, doc = load_checkpoint(checkpoint_path)
    ds = load_csv(resolve_dataset(dataset_ref))
    if ds.d != model.params.config.input_dim:
        raise ShapeError(f"dataset has {ds.d} features, checkpoint expects {model.params.config.input_dim}")
    data = doc.get("data")
    std = apply_standardization(ds, data["mean"], data["std"]) if data else standardize(ds)
    z = dump_latent(model, std.X, t)
    if out_path:
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"z{i}" for i in range(z.shape[1])] + ["label"])
            for row, y in zip(z, ds.y):
                w.writerow([repr(float(v)) for v in row] + [int(y)])
    return z


def _cell_name(params: dict) -> str:
    return "__".join(f"{k}={v}" for k, v in params.items())


def _completed(result_path) -> bool:
    try:
        with open(result_path) as fh:
            schemas.validate(json.load(fh), "result")
        return True
    except (OSError, ValueError, schemas.SchemaError):
        return False


def _run_cell(cell_cfg: dict) -> str:
    run_evaluate(cell_cfg)
    return os.path.join(cell_cfg["out_dir"], "result.json")


def run_sweep(cfg: dict, jobs: int = 1, resume: bool = False) -> dict:
    """Evaluate every cell of the grid's Cartesian product and write ``index.json``."""
    grid = cfg["grid"]
    axes = list(grid)
    base = {k: v for k, v in cfg.items() if k != "grid"}
    cells = []
    for values in itertools.product(*(grid[a] for a in axes)):
        params = dict(zip(axes, values))
        name = _cell_name(params)
        cell_cfg = validate({**base, **params, "out_dir": os.path.join(cfg["out_dir"], "cells", name)})
        cells.append((name, params, cell_cfg))

    todo, statuses = [], {}
    for name, _, cell_cfg in cells:
        if resume and _completed(os.path.join(cell_cfg["out_dir"], "result.json")):
            statuses[name] = "skipped"
        else:
            todo.append((name, cell_cfg))
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for (name, _), _ in zip(todo, pool.map(_run_cell, [c for _, c in todo])):
                statuses[name] = "done"
    else:
        for name, cell_cfg in todo:
            _run_cell(cell_cfg)
            statuses[name] = "done"

    index = {
        "schema_version": RESULT_SCHEMA_VERSION,
        "axes": {a: list(grid[a]) for a in axes},
        "cells": [
            {"name": name, "params": params, "result": os.path.join("cells", name, "result.json"), "status": statuses[name]}
            for name, params, _ in cells
        ],
    }
    schemas.validate(index, "sweep_index")
    _write_json(os.path.join(cfg["out_dir"], "index.json"), index)
    return index


def strip_volatile(result: dict) -> dict:
    return {k: v for k, v in result.items() if k not in VOLATILE_KEYS}

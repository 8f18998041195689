"""CSV ingestion, standardization and the train/eval split protocols."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .core import RandomSource
from .errors import ParseError, SplitError

LABEL_COLUMN = "label"
MODES = ("unsupervised", "semi")


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = ()
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class SplitPlan:
    mode: str
    train: np.ndarray
    eval: np.ndarray
    seed: int


def load_csv(path, name: str | None = None) -> Dataset:
    """Read a numeric table with a 0/1 ``label`` column in any position.

    Line numbers in errors count the header as line 1.
    """
    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file", line=1)
        header = [h.strip() for h in header]
        if LABEL_COLUMN not in header:
            raise ParseError(f"{path}: no '{LABEL_COLUMN}' column in header", line=1)
        li = header.index(LABEL_COLUMN)
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}: line {lineno} has {len(rec)} fields, header has {len(header)}", line=lineno)
            vals = []
            for ci, cell in enumerate(rec):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: non-numeric cell {cell!r} in data row {lineno - 1} (line {lineno}), "
                        f"column {ci + 1} ({header[ci]})",
                        line=lineno, column=ci + 1,
                    ) from None
                if math.isnan(v):
                    raise ParseError(f"{path}: NaN at line {lineno}, column {ci + 1}", line=lineno, column=ci + 1)
                vals.append(v)
            lab = vals.pop(li)
            if lab not in (0.0, 1.0):
                raise ParseError(f"{path}: label must be 0 or 1 at line {lineno}", line=lineno, column=li + 1)
            rows.append(vals)
            labels.append(int(lab))
    if not rows:
        raise ParseError(f"{path}: no data rows", line=2)
    feats = tuple(h for i, h in enumerate(header) if i != li)
    return Dataset(name, np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64), feats)


def column_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and population stds; zero-variance columns get std 1."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return mean, std


def standardize(ds: Dataset, rows=None) -> Dataset:
    """Scale every column to zero mean / unit variance.

    Statistics come from ``rows`` when given (``standardize_scope = train``),
    else from the whole table.  Constant columns map to zeros.
    """
    src = ds.X if rows is None else ds.X[np.asarray(rows)]
    if src.shape[0] < 2:
        raise ValueError("standardize needs at least two rows")
    mean, std = column_stats(src)
    return apply_standardization(ds, mean, std)


def apply_standardization(ds: Dataset, mean, std) -> Dataset:
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    X = (ds.X - mean) / std
    return replace(ds, X=X, mean=mean, std=std)


def make_split(ds: Dataset, mode: str, seed: int) -> SplitPlan:
    """Row split for one seed.

    ``semi``: a seeded shuffle of the normal rows, the first half (floor)
    trains; the rest of the normals plus every anomaly are evaluated.
    ``unsupervised``: every row trains and is evaluated.
    """
    all_rows = np.arange(ds.n)
    if mode == "unsupervised":
        return SplitPlan(mode, all_rows, all_rows.copy(), seed)
    if mode != "semi":
        raise SplitError(f"unknown split mode {mode!r}")
    normal = np.flatnonzero(ds.y == 0)
    anomalous = np.flatnonzero(ds.y == 1)
    if normal.size < 2 or anomalous.size < 1:
        raise SplitError(f"semi split needs >= 2 normals and >= 1 anomaly, got {normal.size} and {anomalous.size}")
    shuffled = normal[RandomSource(seed).stream("split").permutation(normal.size)]
    k = normal.size // 2
    train = np.sort(shuffled[:k])
    evaluate = np.sort(np.concatenate([shuffled[k:], anomalous]))
    return SplitPlan(mode, train, evaluate, seed)


def resolve_dataset(ref: str, data_dir: str = "data") -> str:
    """Map a dataset name to ``<data_dir>/<name>.csv``; paths pass through."""
    if os.sep in ref or ref.endswith(".csv"):
        return ref
    return os.path.join(data_dir, f"{ref}.csv")

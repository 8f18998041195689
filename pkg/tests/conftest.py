import os

import numpy as np
import pytest

from ddae.core import RandomSource

HERE = os.path.dirname(__file__)
ROOT = os.path.dirname(HERE)


@pytest.fixture
def fixtures_dir():
    return os.path.join(HERE, "fixtures")


@pytest.fixture
def breastw_path():
    return os.path.join(ROOT, "data", "breastw.csv")


def gaussian_blob(n_in=500, n_out=25, d=2, box=5.0, seed=0):
    """Inliers ~ N(0, I); outliers uniform on [-box, box]^d.  Label 1 = outlier."""
    rng = RandomSource(seed)
    inl = rng.gauss_matrix(n_in, d)
    out = (2.0 * rng.uniform((n_out, d)) - 1.0) * box
    X = np.vstack([inl, out])
    y = np.r_[np.zeros(n_in, dtype=np.int64), np.ones(n_out, dtype=np.int64)]
    return X, y


def write_csv(path, X, y, label_pos=None):
    d = X.shape[1]
    names = [f"f{i}" for i in range(d)]
    pos = d if label_pos is None else label_pos
    header = names[:pos] + ["label"] + names[pos:]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row, lab in zip(X, y):
            vals = [repr(float(v)) for v in row]
            fh.write(",".join(vals[:pos] + [str(int(lab))] + vals[pos:]) + "\n")
    return path


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddae.errors import UndefinedMetricError
from ddae.metrics import aggregate_seeds, mean_std, per_step_curve, pr_auc, roc_auc

from metric_oracles import ap_threshold_enumeration, roc_all_pairs


def random_instance(rng, n, ties):
    y = rng.integers(0, 2, size=n)
    y[0], y[1] = 0, 1
    s = rng.integers(0, 4, size=n).astype(float) if ties else rng.normal(size=n)
    return s, y


@pytest.mark.parametrize("ties", [False, True])
def test_roc_matches_all_pairs(ties):
    rng = np.random.default_rng(10 + ties)
    for _ in range(50):
        s, y = random_instance(rng, 100, ties)
        assert abs(roc_auc(s, y) - roc_all_pairs(s.tolist(), y.tolist())) < 1e-12


@pytest.mark.parametrize("ties", [False, True])
def test_pr_matches_threshold_enumeration(ties):
    rng = np.random.default_rng(20 + ties)
    for _ in range(50):
        s, y = random_instance(rng, 50, ties)
        assert abs(pr_auc(s, y) - ap_threshold_enumeration(s.tolist(), y.tolist())) < 1e-12


def test_trivial_values():
    y = [0, 0, 1, 1]
    assert roc_auc([0.1, 0.2, 0.8, 0.9], y) == 1.0
    assert pr_auc([0.1, 0.2, 0.8, 0.9], y) == 1.0
    assert roc_auc([1.0] * 4, y) == 0.5
    n = 7
    assert pr_auc(list(range(n, 0, -1)), [0] * (n - 1) + [1]) == pytest.approx(1 / n, abs=1e-15)


def test_pr_tied_block_is_permutation_invariant():
    # two tied scores, one positive: precision 1/2 at recall 1
    assert pr_auc([1.0, 1.0], [0, 1]) == 0.5
    assert pr_auc([1.0, 1.0], [1, 0]) == 0.5


def test_undefined_metrics():
    with pytest.raises(UndefinedMetricError):
        roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(UndefinedMetricError):
        roc_auc([0.1, 0.2], [0, 0])
    with pytest.raises(UndefinedMetricError):
        pr_auc([0.1, 0.2], [0, 0])
    assert pr_auc([0.1, 0.2], [1, 1]) == 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monotone_transform_invariance(seed):
    rng = np.random.default_rng(seed)
    s, y = random_instance(rng, 40, ties=bool(seed % 2))
    s = s / 4.0
    for f in (np.exp, lambda v: 1000.0 * v):
        assert roc_auc(f(s), y) == pytest.approx(roc_auc(s, y), abs=1e-12)
        assert pr_auc(f(s), y) == pytest.approx(pr_auc(s, y), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_roc_complement(seed):
    s, y = random_instance(np.random.default_rng(seed), 30, ties=False)
    assert roc_auc(s, y) + roc_auc(-s, y) == pytest.approx(1.0, abs=1e-12)


def expected_random_ap(n, n_pos):
    """Exact mean AP of a uniformly random ranking without ties."""
    h = sum(1.0 / i for i in range(1, n + 1))
    return (h + (n_pos - 1) / (n - 1) * (n - h)) / n


def test_random_scores_pr_tends_to_prevalence():
    rng = np.random.default_rng(3)
    for n, n_pos in ((200, 20), (4000, 400)):
        y = np.r_[np.ones(n_pos), np.zeros(n - n_pos)].astype(int)
        vals = np.array([pr_auc(rng.random(n), y) for _ in range(200)])
        target = expected_random_ap(n, n_pos)
        assert abs(vals.mean() - target) < 4 * vals.std() / np.sqrt(vals.size)
    # the finite-sample excess over prevalence vanishes as n grows
    assert expected_random_ap(4000, 400) - 0.1 < 0.004


def test_per_step_curve_single_column():
    s = np.array([[0.3], [0.1], [0.9]])
    per, cum = per_step_curve(s, [0, 0, 1])
    assert per.tolist() == cum.tolist() == [1.0]


def test_per_step_curve_constructed_peak():
    rng = np.random.default_rng(0)
    y = np.r_[np.zeros(30), np.ones(10)].astype(int)
    mat = rng.random((40, 6))
    mat[:, 2] = y * 10 + rng.random(40)
    per, cum = per_step_curve(mat, y, "roc_auc")
    assert int(np.argmax(per)) + 1 == 3
    assert per[2] == 1.0
    assert cum[-1] == roc_auc(np.cumsum(mat, axis=1)[:, -1], y)


def test_aggregate_seeds():
    one = aggregate_seeds([0.7], [0.8])
    assert one.pr_auc_std == 0.0 and one.roc_auc_std == 0.0
    s = aggregate_seeds([0.4, 0.6], [0.5, 0.5])
    assert s.pr_auc_mean == pytest.approx(0.5, abs=1e-15)
    assert s.pr_auc_std == pytest.approx(0.1, abs=1e-15)
    vals = [0.91, 0.87, 0.95, 0.9, 0.88]
    m = sum(vals) / 5
    sd = (sum((v - m) ** 2 for v in vals) / 5) ** 0.5
    assert mean_std(vals) == pytest.approx((m, sd), abs=1e-15)
    d = s.to_dict()
    assert d["pr_auc"]["per_seed"] == [0.4, 0.6]

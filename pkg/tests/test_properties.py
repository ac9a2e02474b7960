"""Property-based checks of the documented invariants."""
import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import as_rec
from vocalscreen.classify import fit_medians, impute
from vocalscreen.dysphonia import ppe, rpde, shimmer_family
from vocalscreen.eval import ConfusionCounts, metrics
from vocalscreen.fselect import (balance_indices, ensemble_rank, gso_rank, lasso_rank, mrmr_rank,
                                 relief_rank, stratified_folds)
from vocalscreen.pitch import CycleSequence

seeds = st.integers(0, 2 ** 32 - 1)
counts = st.integers(0, 500)


def problem(seed, n=40, m=6):
    rng = np.random.default_rng(seed)
    y = np.zeros(n, dtype=np.int8)
    y[rng.permutation(n)[: n // 2]] = 1
    X = rng.standard_normal((n, m)) + np.outer(y, rng.uniform(0, 1.5, m))
    return rng, X, y


@given(counts, counts, counts, counts)
def test_metrics_bounded_and_identities(tp, fp, tn, fn):
    assume(tp + fn > 0 and tn + fp > 0)
    m = metrics(ConfusionCounts(tp, fp, tn, fn))
    assert all(0.0 <= v <= 1.0 for v in m.values())
    assert m["accuracy"] == (tp + tn) / (tp + fp + tn + fn)
    if tp + fn == tn + fp:
        assert abs(m["accuracy"] - m["balanced_accuracy"]) <= 1e-15


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_rankers_ignore_row_order(seed):
    rng, X, y = problem(seed)
    perm = rng.permutation(len(y))
    for rank in (mrmr_rank, gso_rank, relief_rank, lasso_rank):
        assert np.array_equal(rank(X, y).order, rank(X[perm], y[perm]).order)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_affine_and_monotone_invariance(seed):
    rng, X, y = problem(seed)
    scale = rng.uniform(0.5, 20, X.shape[1]) * rng.choice([-1, 1], X.shape[1])
    Xa = X * scale + rng.uniform(-50, 50, X.shape[1])
    for rank in (gso_rank, lasso_rank):
        assert np.array_equal(rank(X, y).order, rank(Xa, y).order)
    Xp = X * np.abs(scale) + 3.0
    assert np.allclose(relief_rank(X, y).scores, relief_rank(Xp, y).scores, atol=1e-12)
    assert np.array_equal(mrmr_rank(X, y).order, mrmr_rank(np.exp(X) - 1, y).order)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(1, 6), seeds)
def test_ensemble_is_permutation(m, k, seed):
    rng = np.random.default_rng(seed)
    from vocalscreen.fselect import RankedFeatures
    ranks = [RankedFeatures(rng.permutation(m), np.zeros(m), "x") for _ in range(k)]
    out = ensemble_rank(ranks, m)
    assert sorted(out.order) == list(range(m))
    assert np.all(np.diff(out.scores) <= 0)


@given(st.lists(st.integers(0, 1), min_size=4, max_size=200), seeds, st.integers(2, 10))
def test_balance_and_folds(labels, seed, folds):
    y = np.array(labels)
    assume(0 < y.sum() < len(y))
    rng = np.random.default_rng(seed)
    idx = balance_indices(y, rng)
    assert np.sum(y[idx] == 1) == np.sum(y[idx] == 0) == min(y.sum(), len(y) - y.sum())
    assert len(set(idx)) == len(idx)
    f = stratified_folds(y[idx], folds, rng)
    for c in (0, 1):
        sizes = np.bincount(f[y[idx] == c], minlength=folds)
        assert sizes.max() - sizes.min() <= 1


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_nonlinear_measures_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    kind = seed % 3
    x = rng.standard_normal(8000)
    if kind == 1:
        x = np.cumsum(x)
    elif kind == 2:
        x = np.sin(np.arange(8000) * rng.uniform(0.01, 0.5)) + 0.1 * x
    assert 0.0 <= rpde(as_rec(x)) <= 1.0
    f0 = 150 * np.exp(rng.standard_normal(100) * rng.uniform(0, 0.3))
    assert 0.0 <= ppe(f0) <= 1.0


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(1e-3, 1e3))
def test_shimmer_gain_invariance(seed, gain):
    rng = np.random.default_rng(seed)
    a = np.exp(0.1 * rng.standard_normal(30))
    p = np.full(30, 0.008)
    assert np.allclose(shimmer_family(CycleSequence(p, a)),
                       shimmer_family(CycleSequence(p, gain * a)), rtol=1e-9, atol=1e-9)


@given(st.lists(st.lists(st.one_of(st.floats(-1e6, 1e6), st.just(float("nan"))),
                         min_size=3, max_size=3), min_size=1, max_size=20))
def test_imputation_removes_missing(rows):
    X = np.array(rows)
    out = impute(X, fit_medians(X))
    assert np.all(np.isfinite(out))
    fin = np.isfinite(X)
    assert np.array_equal(out[fin], X[fin])

from fractions import Fraction

import numpy as np
import pytest

from vocalscreen.errors import InputError, InsufficientClassError, UndefinedMetricError
from vocalscreen.eval import (DEFAULT_SIZES, ConfusionCounts, age_association, balance,
                              confusion, cross_validate, feature_sweep, jackknife_correlations,
                              ks_test, mann_whitney, metrics, normalized_mi, pct, pearson,
                              summary_table, write_sweep_csv)
from vocalscreen.fselect import RankedFeatures


def test_metric_arithmetic():
    m = metrics(ConfusionCounts(tp=60, fp=30, tn=70, fn=40))
    assert (m["sensitivity"], m["specificity"], m["accuracy"], m["balanced_accuracy"]) == \
        (0.6, 0.7, 0.65, 0.65)
    assert set(metrics(ConfusionCounts(25, 25, 25, 25)).values()) == {0.5}
    with pytest.raises(UndefinedMetricError):
        metrics(ConfusionCounts(0, 3, 5, 0))


def test_metrics_exact_against_fractions(rng):
    for _ in range(300):
        tp, fp, tn, fn = (int(v) for v in rng.integers(0, 400, 4))
        if tp + fn == 0 or tn + fp == 0:
            continue
        m = metrics(ConfusionCounts(tp, fp, tn, fn))
        bal = (Fraction(tp, tp + fn) + Fraction(tn, tn + fp)) / 2
        assert m["balanced_accuracy"] == float(bal)
        assert m["accuracy"] == float(Fraction(tp + tn, tp + fp + tn + fn))


def test_balanced_set_accuracy_equals_balanced_accuracy():
    m = metrics(ConfusionCounts(tp=41, fp=12, tn=38, fn=9))
    assert m["accuracy"] == m["balanced_accuracy"]


def test_pct_rounding_half_even():
    assert (pct(0.649), pct(0.68), pct(0.6645)) == ("64.9", "68.0", "66.4")
    assert pct(0.6655) == "66.6" and pct(0.5) == "50.0"


def test_confusion_counts():
    c = confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert (c.tp, c.fp, c.tn, c.fn, c.total) == (2, 1, 1, 1, 5)


def test_balance_sizes_and_seed():
    y = np.r_[np.ones(2759, dtype=int), np.zeros(15321, dtype=int)]
    idx = balance(None, y, seed=1)
    assert np.sum(y[idx] == 1) == np.sum(y[idx] == 0) == 2759
    assert np.array_equal(idx, balance(None, y, seed=1))
    y2 = np.repeat([0, 1], 50)
    assert np.array_equal(np.sort(balance(None, y2, seed=3)), np.arange(100))
    with pytest.raises(InsufficientClassError):
        balance(None, np.ones(10, dtype=int))


# -- cross-validation ------------------------------------------------------------------

def _separable(rng, n=80, m=4):
    y = np.repeat([0, 1], n // 2)
    X = rng.standard_normal((n, m))
    X[:, 0] += 6 * y
    return X, y


def test_cv_iteration_records_and_partition(rng):
    X, y = _separable(rng)
    rep = cross_validate(X, y, model="nb", reps=3, folds=5, seed=2)
    assert len(rep.iterations) == 15
    for r in range(3):
        its = [it for it in rep.iterations if it["rep"] == r]
        assert sum(it["tp"] + it["fn"] for it in its) == 40
        assert sum(it["tn"] + it["fp"] for it in its) == 40
    assert rep.aggregate["balanced_accuracy"]["mean"] >= 0.95


def test_cv_reproducible_and_feature_order_free(rng):
    X, y = _separable(rng)
    a = cross_validate(X, y, features=[2, 0], model="rf", reps=1, folds=4, n_trees=20, seed=5)
    b = cross_validate(X, y, features=[0, 2], model="rf", reps=1, folds=4, n_trees=20, seed=5)
    assert a.to_dict() == b.to_dict()


def test_participant_grouping_keeps_groups_together(rng):
    X, y = _separable(rng, n=120)
    groups = np.repeat(np.arange(60), 2)
    y = np.repeat(y[::2], 2)
    reports = []
    import vocalscreen.eval as ev
    orig = ev._fit_predict

    def spy(model, Xtr, ytr, Xte, *a):
        reports.append((Xtr, Xte))
        return orig(model, Xtr, ytr, Xte, *a)

    ev._fit_predict = spy
    try:
        cross_validate(X, y, model="nb", reps=2, folds=5, grouping="participant", groups=groups)
    finally:
        ev._fit_predict = orig
    row_of = {tuple(r): g for r, g in zip(X, groups)}
    for Xtr, Xte in reports:
        assert not {row_of[tuple(r)] for r in Xtr} & {row_of[tuple(r)] for r in Xte}


def test_cv_argument_errors(rng):
    X, y = _separable(rng)
    with pytest.raises(InputError):
        cross_validate(X, y, folds=1)
    with pytest.raises(InputError):
        cross_validate(X, y, grouping="participant")
    with pytest.raises(InputError):
        cross_validate(X, y, features=[9])
    with pytest.raises(InputError):
        cross_validate(X, y, model="svm", reps=1, folds=2)


def test_feature_sweep(rng, tmp_path):
    X, y = _separable(rng, m=6)
    ranks = {"A": RankedFeatures(np.arange(6), np.zeros(6), "A"),
             "B": RankedFeatures(np.arange(6)[::-1], np.zeros(6), "B")}
    res = feature_sweep(X, y, ranks, sizes=(1, 6), model="nb", reps=1, folds=4, seed=1)
    assert list(res) == [("A", 1), ("A", 6), ("B", 1), ("B", 6)]
    assert res[("A", 6)].iterations == res[("B", 6)].iterations
    assert res[("A", 1)].aggregate["balanced_accuracy"]["mean"] >= \
        res[("A", 6)].aggregate["balanced_accuracy"]["mean"] - 0.05
    with pytest.raises(InputError):
        feature_sweep(X, y, ranks, sizes=(7,))
    p = tmp_path / "s.csv"
    write_sweep_csv(res, p)
    lines = p.read_text().splitlines()
    assert lines[0] == ("algorithm,n_features,sens_mean,sens_sd,spec_mean,spec_sd,"
                        "acc_mean,acc_sd,bal_mean,bal_sd") and len(lines) == 5
    row = summary_table({"nb": res[("A", 6)]})["nb"]
    assert set(row) == {"sensitivity", "specificity", "accuracy", "balanced_accuracy"}
    assert DEFAULT_SIZES == (5, 10, 25, 50, 75, 100, 150, 200, 250, 307)


# -- exploratory statistics -------------------------------------------------------------

def test_correlation_and_mi(rng):
    y = rng.integers(0, 2, 10000)
    assert pearson(y, -y) == pytest.approx(-1.0)
    assert np.isnan(pearson(np.ones(5), np.arange(5)))
    assert normalized_mi(y, y) == pytest.approx(1.0)
    assert normalized_mi(rng.standard_normal(10000), y) <= 0.01


def test_jackknife(rng):
    y = np.r_[np.ones(60, dtype=int), np.zeros(140, dtype=int)]
    X = rng.standard_normal((200, 5))
    X[:, 3] = y + 0.1 * rng.standard_normal(200)
    X[:, 1] = 4.0
    res = jackknife_correlations(X, y, reps=100, seed=1)
    assert res.reps == 100 and res.order[0] == 3 and res.mean[3] > 0
    assert res.undefined[1] and 1 not in res.order


def test_rank_tests():
    assert mann_whitney([1, 2, 3], [4, 5, 6])[0] == 0.0
    d, p = ks_test(np.arange(50.0), np.arange(50.0))
    assert d == 0.0 and p == pytest.approx(1.0)
    assert ks_test(np.arange(50.0), np.arange(100.0, 150.0))[0] == 1.0
    with pytest.raises(InputError):
        ks_test([], [1.0])


def test_age_association(rng):
    ages = rng.uniform(20, 90, 500)
    X = np.column_stack([0.01 * ages + 0.1 * rng.standard_normal(500), rng.standard_normal(500)])
    res, dropped = age_association(X, list(ages[:-3]) + [None] * 3)
    assert dropped == 3 and res[0][1] > 0.5 and abs(res[1][1]) <= 0.1 and res[0][2] == 497
    with pytest.raises(InputError):
        age_association(np.zeros((0, 2)), [])

import numpy as np
import pytest

from vocalscreen.classify import (ForestModel, Tree, default_mtry, fit_medians, impute,
                                  nb_log_posterior, nb_predict, nb_train, random_classifier,
                                  rf_predict, rf_train, rf_vote_fraction)
from vocalscreen.errors import DegenerateTrainingError, InputError

# 10-row fixture for the single-tree oracle; no two features ever tie for a split
FIX_X = np.array([[5.2, 4.8], [4.3, 1.2], [0.7, 7.9], [7.1, 4.6], [5.1, 7.0],
                  [6.3, 5.6], [5.8, 1.0], [4.9, 0.6], [7.5, 0.8], [3.5, 2.9]])
FIX_Y = np.array([1, 0, 0, 0, 0, 1, 1, 1, 1, 1])


def cart_oracle(X, y):
    """Gini CART grown to purity, written as plain recursion over dict nodes.

    Within a feature the lowest of equally good thresholds wins; a tie
    between features would depend on the random visiting order, so the
    fixture must not contain one.
    """
    if len(set(y)) == 1:
        return {"leaf": int(y[0])}
    per_feature = []
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f]))
        best = None
        for a, b in zip(vals, vals[1:]):
            thr = (a + b) / 2
            left = X[:, f] <= thr
            score = 0.0
            for side in (left, ~left):
                n = side.sum()
                n1 = y[side].sum()
                score += ((n - n1) ** 2 + n1 ** 2) / n
            if best is None or score > best[0]:
                best = (score, f, thr)
        if best is not None:
            per_feature.append(best)
    top = max(b[0] for b in per_feature)
    winners = [b for b in per_feature if b[0] == top]
    assert len(winners) == 1, "fixture has a tie between features"
    _, f, thr = winners[0]
    m = X[:, f] <= thr
    return {"f": f, "t": thr, "l": cart_oracle(X[m], y[m]), "r": cart_oracle(X[~m], y[~m])}


def oracle_predict(node, x):
    while "leaf" not in node:
        node = node["l"] if x[node["f"]] <= node["t"] else node["r"]
    return node["leaf"]


def blobs(n, rng, sep=4.0):
    y = np.repeat([0, 1], n // 2)
    X = rng.standard_normal((n, 2)) + sep * y[:, None]
    return X, y


# -- forest ----------------------------------------------------------------------------

def test_blobs_train_and_test_accuracy(rng):
    X, y = blobs(200, rng)
    m = rf_train(X, y, n_trees=100, seed=1)
    assert np.mean(rf_predict(m, X)[0] == y) >= 0.99
    Xt, yt = blobs(400, rng)
    assert np.mean(rf_predict(m, Xt)[0] == yt) >= 0.95


def test_single_tree_matches_cart_oracle(rng):
    tree = cart_oracle(FIX_X, FIX_Y)
    m = rf_train(FIX_X, FIX_Y, n_trees=1, mtry=2, bootstrap=False, seed=5)
    grid = rng.uniform(0, 8, (500, 2))
    grid = np.vstack([FIX_X, grid])
    expected = [oracle_predict(tree, x) for x in grid]
    assert list(rf_predict(m, grid)[0]) == expected


def test_tree_structure_invariants(rng):
    X, y = blobs(120, rng, sep=1.0)
    m = rf_train(X, y, n_trees=20, seed=2)
    for t in m.trees:
        internal = t.feature >= 0
        assert np.all(t.feature[internal] < 2)
        leaves = ~internal
        # grown to purity: every leaf is single-class among its bootstrap weight
        assert np.all(np.min(t.counts[leaves], axis=1) == 0)
    assert m.mtry == default_mtry(2) == 1 and default_mtry(307) == 17


def test_same_seed_same_bytes_and_roundtrip(rng):
    X, y = blobs(100, rng, sep=1.5)
    a = rf_train(X, y, n_trees=30, seed=9)
    b = rf_train(X, y, n_trees=30, seed=9, threads=3)
    assert a.to_json() == b.to_json()
    back = ForestModel.from_json(a.to_json())
    assert back.to_json() == a.to_json()
    assert np.array_equal(rf_vote_fraction(back, X), rf_vote_fraction(a, X))
    with pytest.raises(InputError):
        ForestModel.from_json('{"format": "other"}')


def test_vote_fractions_and_tie_rule():
    pd_leaf = Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
                   np.array([[0.0, 3.0]]))
    hc_leaf = Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
                   np.array([[2.0, 0.0]]))
    X = np.zeros((3, 4))
    cls, p, tie = rf_predict(ForestModel([pd_leaf] * 4, 4, 2, 0), X)
    assert np.all(p == 1.0) and np.all(cls == 1) and not tie.any()
    cls, p, tie = rf_predict(ForestModel([pd_leaf, hc_leaf] * 250, 4, 2, 0), X)
    assert np.all(p == 0.5) and np.all(cls == 0) and tie.all()
    with pytest.raises(InputError):
        rf_predict(ForestModel([pd_leaf], 4, 2, 0), np.zeros((2, 3)))


def test_degenerate_training(rng):
    X = rng.standard_normal((10, 2))
    for train in (lambda: rf_train(X, np.ones(10)), lambda: nb_train(X, np.zeros(10))):
        with pytest.raises(DegenerateTrainingError):
            train()
    with pytest.raises(InputError):
        rf_train(X, np.r_[np.zeros(5), np.ones(5)], mtry=3)


def test_monotone_transform_invariance(rng):
    # Thresholds are midpoints, so a point strictly inside a gap between a
    # node's values may cross under a nonlinear map; the tree structure and
    # every in-sample decision are exactly invariant.
    X = rng.standard_normal((150, 3))
    y = ((X[:, 0] + X[:, 1] + 0.5 * rng.standard_normal(150)) > 0).astype(int)
    f = lambda v: np.exp(v) - 7
    a = rf_train(X, y, n_trees=40, seed=3, bootstrap=False)
    b = rf_train(f(X), y, n_trees=40, seed=3, bootstrap=False)
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.feature, tb.feature) and np.array_equal(ta.counts, tb.counts)
        assert np.array_equal(ta.left, tb.left) and np.array_equal(ta.apply(X), tb.apply(f(X)))
    assert np.array_equal(rf_vote_fraction(a, X), rf_vote_fraction(b, f(X)))


def test_vote_variance_shrinks_with_more_trees(rng):
    X, y = blobs(120, rng, sep=1.0)
    probe = rng.standard_normal((30, 2)) + 0.5
    var = {}
    for n in (10, 500):
        p = np.array([rf_vote_fraction(rf_train(X, y, n_trees=n, seed=s), probe)
                      for s in range(8)])
        var[n] = p.var(axis=0).mean()
    assert var[10] / var[500] > 2


# -- naive Bayes ---------------------------------------------------------------------

def test_nb_gaussians_at_plus_minus_three(rng):
    X = np.r_[rng.normal(-3, 1, 500), rng.normal(3, 1, 500)][:, None]
    y = np.repeat([0, 1], 500)
    m = nb_train(X, y)
    grid = np.linspace(-1, 1, 2001)[:, None]
    cut = grid[np.argmax(nb_predict(m, grid))][0]
    assert abs(cut) <= 0.1
    Xt = np.r_[rng.normal(-3, 1, 1000), rng.normal(3, 1, 1000)][:, None]
    assert np.mean(nb_predict(m, Xt) == np.repeat([0, 1], 1000)) >= 0.99


def test_nb_priors_decide_equal_likelihoods():
    X = np.array([[-1.0], [1.0], [-1.0], [1.0], [-1.0], [1.0]])
    y = np.array([0, 0, 1, 1, 1, 1])
    m = nb_train(X, y)
    assert nb_predict(m, [[0.3]])[0] == 1
    lp = nb_log_posterior(m, [[0.3]])
    assert lp[0, 1] - lp[0, 0] == pytest.approx(np.log(2))


def test_nb_zero_variance_feature_and_scaling(rng):
    X = np.column_stack([rng.standard_normal(40), np.full(40, 2.0)])
    y = np.repeat([0, 1], 20)
    X[y == 1, 0] += 2
    m = nb_train(X, y)
    assert np.all(m.variances >= 1e-9)
    probe = rng.standard_normal((50, 2)) + [1, 2]
    lp = nb_log_posterior(m, probe)
    # a common additive log-likelihood offset cannot change the decision
    shifted = lp + 123.4
    assert np.array_equal(shifted[:, 1] > shifted[:, 0], nb_predict(m, probe).astype(bool))


# -- baseline and imputation -------------------------------------------------------------

def test_random_classifier():
    a = random_classifier(10000, seed=4)
    assert abs(a.mean() - 0.5) <= 0.02
    assert np.array_equal(a, random_classifier(10000, seed=4))
    y = np.repeat([0, 1], 5000)
    bal = 0.5 * (np.mean(a[y == 1] == 1) + np.mean(a[y == 0] == 0))
    assert abs(bal - 0.5) <= 0.03


def test_median_imputation():
    X = np.array([[1.0, np.nan], [3.0, 4.0], [np.nan, 6.0]])
    med = fit_medians(X)
    assert list(med) == [2.0, 5.0]
    out = impute(X, med)
    assert out[2, 0] == 2.0 and out[0, 1] == 5.0 and np.isnan(X[0, 1])
    assert list(fit_medians(np.full((2, 1), np.nan))) == [0.0]

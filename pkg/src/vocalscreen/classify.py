"""Random Forest, Gaussian Naive Bayes and the coin-flip baseline.

Labels are coded 1 = PD and 0 = HC throughout.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateTrainingError, InputError

N_TREES = 500
VAR_FLOOR = 1e-9
FOREST_FORMAT = "vocalscreen-forest"
FOREST_VERSION = 1


def _xy(X, y=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InputError("X must be 2-D")
    if y is None:
        return X
    y = np.asarray(y).astype(np.int8)
    if len(y) != len(X):
        raise InputError("X and y lengths differ")
    if not set(np.unique(y)) <= {0, 1}:
        raise InputError("labels must be coded 0 (HC) / 1 (PD)")
    if len(np.unique(y)) < 2:
        raise DegenerateTrainingError("training labels contain a single class")
    return X, y


# -- imputation ------------------------------------------------------------------

def fit_medians(X):
    """Per-feature median over finite values (0 for a column with none)."""
    X = np.asarray(X, dtype=float)
    out = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        col = col[np.isfinite(col)]
        if len(col):
            out[j] = np.median(col)
    return out


def impute(X, medians):
    X = np.array(X, dtype=float, copy=True)
    bad = ~np.isfinite(X)
    if bad.any():
        X[bad] = np.broadcast_to(medians, X.shape)[bad]
    return X


# -- random forest ---------------------------------------------------------------

@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    def apply(self, X):
        return kernels.apply_tree(self.feature, self.threshold, self.left, self.right,
                                  np.ascontiguousarray(X, dtype=np.float64))

    def vote(self, X):
        """PD vote (1) where the leaf's PD weight exceeds its HC weight."""
        c = self.counts[self.apply(X)]
        return (c[:, 1] > c[:, 0]).astype(np.int8)


@dataclass
class ForestModel:
    trees: list
    n_features: int
    mtry: int
    seed: int
    bootstrap: bool = True
    medians: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def n_trees(self):
        return len(self.trees)

    def to_json(self) -> str:
        doc = {
            "format": FOREST_FORMAT, "version": FOREST_VERSION,
            "n_features": self.n_features, "mtry": self.mtry, "seed": self.seed,
            "bootstrap": self.bootstrap,
            "medians": None if self.medians is None else [float(v) for v in self.medians],
            "meta": self.meta,
            "trees": [{"feature": t.feature.tolist(), "threshold": t.threshold.tolist(),
                       "left": t.left.tolist(), "right": t.right.tolist(),
                       "counts": t.counts.tolist()} for t in self.trees],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("format") != FOREST_FORMAT or doc.get("version") != FOREST_VERSION:
            raise InputError("not a version-1 forest file")
        trees = [Tree(np.array(t["feature"], dtype=np.int64), np.array(t["threshold"], dtype=float),
                      np.array(t["left"], dtype=np.int64), np.array(t["right"], dtype=np.int64),
                      np.array(t["counts"], dtype=float).reshape(-1, 2)) for t in doc["trees"]]
        med = doc.get("medians")
        return cls(trees, int(doc["n_features"]), int(doc["mtry"]), int(doc["seed"]),
                   bool(doc["bootstrap"]), None if med is None else np.array(med), doc.get("meta", {}))


def default_mtry(n_features):
    return max(1, math.isqrt(int(n_features)))


def _tree_plan(seed, t, n, bootstrap):
    rng = np.random.default_rng([int(seed), int(t)])
    if bootstrap:
        w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
    else:
        w = np.ones(n)
    return w, int(rng.integers(0, 2 ** 63 - 1))


def rf_train(X, y, n_trees=N_TREES, mtry=None, seed=0, bootstrap=True, threads=1) -> ForestModel:
    """Breiman forest: bootstrap samples, Gini splits over ``mtry`` random
    candidate features per node, trees grown to purity.

    Tree ``t`` draws its bootstrap and split seed from (seed, t), so the
    forest does not depend on ``threads``.
    """
    X, y = _xy(X, y)
    if n_trees < 1:
        raise InputError("n_trees must be at least 1")
    M = X.shape[1]
    mtry = default_mtry(M) if mtry is None else int(mtry)
    if not 1 <= mtry <= M:
        raise InputError(f"mtry={mtry} outside 1..{M}")

    def grow(t):
        w, s = _tree_plan(seed, t, len(y), bootstrap)
        return Tree(*kernels.build_tree(X, y, w, mtry, np.uint64(s)))

    if threads > 1 and n_trees > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, range(n_trees)))
    else:
        trees = [grow(t) for t in range(n_trees)]
    return ForestModel(trees, M, mtry, int(seed), bool(bootstrap))


def rf_vote_fraction(model: ForestModel, X):
    X = _xy(np.atleast_2d(X))
    if X.shape[1] != model.n_features:
        raise InputError(f"expected {model.n_features} features, got {X.shape[1]}")
    votes = np.zeros(len(X))
    for t in model.trees:
        votes += t.vote(X)
    return votes / model.n_trees


def rf_predict(model: ForestModel, X):
    """(class, PD vote fraction, tie flag) per row; an exact tie goes to HC."""
    p = rf_vote_fraction(model, X)
    tie = p == 0.5
    return (p > 0.5).astype(np.int8), p, tie


# -- naive Bayes ---------------------------------------------------------------------

@dataclass
class NaiveBayesModel:
    means: np.ndarray
    variances: np.ndarray
    log_priors: np.ndarray


def nb_train(X, y, var_floor=VAR_FLOOR) -> NaiveBayesModel:
    X, y = _xy(X, y)
    means = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
    var = np.stack([X[y == c].var(axis=0) for c in (0, 1)])
    priors = np.array([np.mean(y == 0), np.mean(y == 1)])
    return NaiveBayesModel(means, np.maximum(var, var_floor), np.log(priors))


def nb_log_posterior(model: NaiveBayesModel, X):
    """Unnormalized log posteriors, shape (rows, 2)."""
    X = _xy(np.atleast_2d(X))
    if X.shape[1] != model.means.shape[1]:
        raise InputError(f"expected {model.means.shape[1]} features, got {X.shape[1]}")
    d = X[:, None, :] - model.means[None, :, :]
    ll = -0.5 * (np.log(2 * np.pi * model.variances)[None] + d * d / model.variances[None]).sum(axis=2)
    return ll + model.log_priors[None, :]


def nb_predict(model: NaiveBayesModel, X):
    """MAP class; equal posteriors go to HC."""
    lp = nb_log_posterior(model, X)
    return (lp[:, 1] > lp[:, 0]).astype(np.int8)


# -- baseline --------------------------------------------------------------------------

def random_classifier(n, seed=0):
    """Fair-coin labels, reproducible per seed."""
    return np.random.default_rng(seed).integers(0, 2, int(n)).astype(np.int8)

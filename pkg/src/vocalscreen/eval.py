"""Balanced cross-validation harness, classification metrics and the
exploratory statistics (correlation, mutual information, rank tests)."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal

import numpy as np
from scipy import stats

from .classify import (fit_medians, impute, nb_predict, nb_train, random_classifier,
                       rf_predict, rf_train)
from .errors import InputError, UndefinedMetricError
from .fselect import balance_indices, equal_frequency_bins, stratified_folds

DEFAULT_SIZES = (5, 10, 25, 50, 75, 100, 150, 200, 250, 307)
METRICS = ("sensitivity", "specificity", "accuracy", "balanced_accuracy")
MODELS = ("rf", "nb", "random")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


def confusion(y_true, y_pred) -> ConfusionCounts:
    t = np.asarray(y_true).astype(bool)
    p = np.asarray(y_pred).astype(bool)
    return ConfusionCounts(int(np.sum(t & p)), int(np.sum(~t & p)),
                           int(np.sum(~t & ~p)), int(np.sum(t & ~p)))


def metrics(c: ConfusionCounts) -> dict:
    """Sensitivity TP/(TP+FN), specificity TN/(TN+FP), accuracy and their mean."""
    if c.tp + c.fn == 0 or c.tn + c.fp == 0:
        raise UndefinedMetricError(f"test set lacks a class: {c}")
    pos, neg = c.tp + c.fn, c.tn + c.fp
    # each ratio is one division of exact integers, so it is correctly rounded
    return {"sensitivity": c.tp / pos, "specificity": c.tn / neg,
            "accuracy": (c.tp + c.tn) / c.total,
            "balanced_accuracy": (c.tp * neg + c.tn * pos) / (2 * pos * neg)}


def pct(x, dp=1):
    """Percentage string rounded half-to-even on the shortest decimal form of x."""
    q = Decimal(1).scaleb(-dp)
    return str((Decimal(repr(float(x))) * 100).quantize(q, rounding=ROUND_HALF_EVEN))


def balance(X, y, seed=0):
    """Indices of a class-balanced undersample of the majority class."""
    return balance_indices(np.asarray(y), np.random.default_rng(seed))


# -- cross-validation ----------------------------------------------------------------

@dataclass
class EvalReport:
    config: dict
    iterations: list = field(default_factory=list)

    def values(self, metric):
        return np.array([it[metric] for it in self.iterations])

    @property
    def aggregate(self):
        out = {}
        for m in METRICS:
            v = self.values(m)
            out[m] = {"mean": float(v.mean()), "sd": float(v.std(ddof=1)) if len(v) > 1 else 0.0}
        return out

    def to_dict(self):
        return {"config": self.config, "aggregate": self.aggregate, "iterations": self.iterations}


def group_folds(y, groups, folds, rng):
    """Fold id per row keeping each group's rows together; groups are dealt
    round-robin within their class to keep folds stratified."""
    y = np.asarray(y)
    groups = np.asarray(groups)
    uniq, inv = np.unique(groups, return_inverse=True)
    glabel = np.zeros(len(uniq), dtype=y.dtype)
    glabel[inv] = y
    gfold = np.empty(len(uniq), dtype=np.int64)
    offset = 0
    for c in np.unique(glabel):
        gi = np.flatnonzero(glabel == c)
        gi = gi[rng.permutation(len(gi))]
        gfold[gi] = (np.arange(len(gi)) + offset) % folds
        offset += len(gi)
    return gfold[inv]


def _fit_predict(model, Xtr, ytr, Xte, seed, n_trees, mtry, threads):
    if model == "random":
        return random_classifier(len(Xte), seed)
    med = fit_medians(Xtr)
    Xtr = impute(Xtr, med)
    Xte = impute(Xte, med)
    if model == "rf":
        m = rf_train(Xtr, ytr, n_trees=n_trees, mtry=mtry, seed=seed, threads=threads)
        return rf_predict(m, Xte)[0]
    if model == "nb":
        return nb_predict(nb_train(Xtr, ytr), Xte)
    raise InputError(f"unknown model {model!r}")


def cross_validate(X, y, features=None, model="rf", reps=10, folds=10, seed=0,
                   grouping="recording", groups=None, n_trees=500, mtry=None,
                   threads=1, config=None) -> EvalReport:
    """Balanced, stratified ``folds``-fold CV repeated ``reps`` times.

    Each repetition draws a fresh balanced undersample and fold assignment
    from the (seed, repetition) stream; with ``grouping='participant'`` all
    rows of a group share a fold. Feature subsets are used in ascending
    index order so equal subsets give equal results.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int8)
    if reps < 1 or folds < 2:
        raise InputError("need reps >= 1 and folds >= 2")
    if grouping not in ("recording", "participant"):
        raise InputError(f"unknown grouping {grouping!r}")
    if grouping == "participant" and groups is None:
        raise InputError("participant grouping needs group ids")
    cols = np.arange(X.shape[1]) if features is None else np.sort(np.asarray(features, dtype=np.int64))
    if len(cols) and (cols.min() < 0 or cols.max() >= X.shape[1]):
        raise InputError("feature index out of range")
    Xs = X[:, cols]
    report = EvalReport(dict(config or {}, model=model, reps=reps, folds=folds, seed=int(seed),
                             grouping=grouping, n_features=int(len(cols)),
                             features=[int(c) for c in cols]))
    for rep in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), rep]))
        keep = balance_indices(y, rng)
        keep = keep[rng.permutation(len(keep))]
        if grouping == "participant":
            fold = group_folds(y[keep], np.asarray(groups)[keep], folds, rng)
        else:
            fold = stratified_folds(y[keep], folds, rng)
        for f in range(folds):
            tr = keep[fold != f]
            te = keep[fold == f]
            it_seed = int(seed) * 1_000_003 + rep * folds + f
            pred = _fit_predict(model, Xs[tr], y[tr], Xs[te], it_seed, n_trees, mtry, threads)
            c = confusion(y[te], pred)
            report.iterations.append(dict(rep=rep, fold=f, **asdict(c), **metrics(c)))
    return report


def feature_sweep(X, y, rankings, sizes=DEFAULT_SIZES, **cv_kwargs):
    """Cross-validate each ranking's top-``size`` features for every size.

    Returns {(algorithm, size): EvalReport} in (ranking, size) order.
    """
    M = np.asarray(X).shape[1]
    bad = [s for s in sizes if not 1 <= s <= M]
    if bad:
        raise InputError(f"subset sizes {bad} outside 1..{M}")
    out = {}
    for alg, r in rankings.items():
        for s in sizes:
            if s > len(r.order):
                raise InputError(f"{alg} ranks only {len(r.order)} features, size {s} requested")
            out[(alg, int(s))] = cross_validate(X, y, features=r.order[:s], **cv_kwargs)
    return out


def write_sweep_csv(results, path, header_comment=None):
    cols = ["sens", "spec", "acc", "bal"]
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("algorithm,n_features," + ",".join(f"{c}_mean,{c}_sd" for c in cols) + "\n")
        for (alg, size), rep in results.items():
            agg = rep.aggregate
            vals = []
            for m in METRICS:
                vals += [repr(agg[m]["mean"]), repr(agg[m]["sd"])]
            fh.write(f"{alg},{size}," + ",".join(vals) + "\n")


def summary_table(reports):
    """Summary rows: name -> {metric: 'mean% +- sd%'} for each report."""
    rows = {}
    for name, rep in reports.items():
        agg = rep.aggregate
        rows[name] = {m: f"{pct(agg[m]['mean'])}% ± {pct(agg[m]['sd'])}%" for m in METRICS}
    return rows


def write_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- exploratory statistics ---------------------------------------------------------

def pearson(x, y):
    """Pearson correlation; NaN when either input has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    den = np.sqrt((xc @ xc) * (yc @ yc))
    if den == 0:
        return float("nan")
    return float(np.clip((xc @ yc) / den, -1.0, 1.0))


def normalized_mi(x, y, n_bins=10):
    """I(x; y) / I(y; y) with x on equal-frequency bins and y discrete."""
    from .fselect import discrete_mi
    yc = np.unique(np.asarray(y), return_inverse=True)[1]
    h = discrete_mi(yc, yc)
    if h <= 0:
        return float("nan")
    b = equal_frequency_bins(np.asarray(x, dtype=float), n_bins)
    return float(np.clip(discrete_mi(b, yc) / h, 0.0, 1.0))


@dataclass
class JackknifeResult:
    mean: np.ndarray
    sd: np.ndarray
    undefined: np.ndarray
    order: np.ndarray
    reps: int


def jackknife_correlations(X, y, reps=100, seed=0) -> JackknifeResult:
    """Pearson correlation of each feature with y (0 = HC, 1 = PD) over
    ``reps`` balanced undersamples. ``order`` sorts defined features by
    descending |mean|; undefined (zero-variance) features are excluded."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(float)
    rng = np.random.default_rng(seed)
    R = np.empty((reps, X.shape[1]))
    for i in range(reps):
        idx = balance_indices(y, rng)
        Xi = X[idx] - X[idx].mean(axis=0)
        yi = y[idx] - y[idx].mean()
        den = np.sqrt((Xi ** 2).sum(axis=0) * (yi @ yi))
        with np.errstate(invalid="ignore", divide="ignore"):
            R[i] = np.where(den > 0, (Xi.T @ yi) / den, np.nan)
    undefined = np.isnan(R).any(axis=0)
    mean = np.where(undefined, np.nan, np.nanmean(np.where(undefined, 0.0, R), axis=0))
    sd = np.where(undefined, np.nan, np.std(np.where(undefined, 0.0, R), axis=0, ddof=1) if reps > 1 else 0.0)
    defined = np.flatnonzero(~undefined)
    order = defined[np.lexsort((defined, -np.abs(mean[defined])))]
    return JackknifeResult(mean, sd, undefined, order, reps)


def _nonempty(*samples):
    for s in samples:
        if len(s) == 0:
            raise InputError("empty sample")


def mann_whitney(x_pd, x_hc):
    """U statistic of the first sample and two-sided normal-approximation
    p-value (tie-corrected, continuity-corrected)."""
    _nonempty(x_pd, x_hc)
    res = stats.mannwhitneyu(x_pd, x_hc, alternative="two-sided", method="asymptotic")
    return float(res.statistic), float(res.pvalue)


def ks_test(x1, x2):
    """Two-sample Kolmogorov-Smirnov D and asymptotic two-sided p-value."""
    _nonempty(x1, x2)
    res = stats.ks_2samp(x1, x2, alternative="two-sided", method="asymp")
    return float(res.statistic), float(res.pvalue)


def age_association(X_hc, ages, features=None):
    """Pearson r of each feature against age over the rows with a known age.

    Returns (results, dropped) where results is a list of
    (feature_index, r, n) and dropped counts rows without an age.
    """
    X = np.asarray(X_hc, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise InputError("no control rows")
    a = np.array([np.nan if v is None else float(v) for v in ages])
    ok = np.isfinite(a)
    if not ok.any():
        raise InputError("no control rows with a known age")
    feats = range(X.shape[1]) if features is None else features
    res = []
    for j in feats:
        col = X[ok, j]
        fin = np.isfinite(col)
        res.append((int(j), pearson(col[fin], a[ok][fin]), int(fin.sum())))
    return res, int((~ok).sum())


def write_scatter_csv(X_hc, ids, ages, feature, name, path, header_comment=None):
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(f"id,age,{name}\n")
        for i, rid in enumerate(ids):
            if ages[i] is None:
                continue
            fh.write(f"{rid},{repr(float(ages[i]))},{repr(float(X_hc[i, feature]))}\n")

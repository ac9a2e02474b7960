"""Filter feature rankers (mRMR, GSO, RELIEF, LASSO), Borda ensemble and
the balance/split/select frequency protocol."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import kernels
from .classify import fit_medians, impute
from .errors import ConvergenceError, InputError, InsufficientClassError, ProtocolError

ALGORITHMS = ("mRMR", "GSO", "RELIEF", "LASSO")
N_BINS = 10
LASSO_STEPS = 100
LASSO_RATIO = 1e-3
LASSO_TOL = 1e-7  # on G_jj * delta^2 relative to var(y), as in glmnet
LASSO_MAX_SWEEPS = 10_000


@dataclass
class RankedFeatures:
    order: np.ndarray
    scores: np.ndarray
    algorithm: str

    def __post_init__(self):
        self.order = np.asarray(self.order, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=float)
        if len(np.unique(self.order)) != len(self.order):
            raise InputError(f"{self.algorithm}: ranking contains duplicates")

    def top(self, k):
        return self.order[:k]

    def ranks(self, n_features):
        """1-based rank of every feature (features not ranked get n + 1)."""
        r = np.full(n_features, len(self.order) + 1, dtype=np.int64)
        r[self.order] = np.arange(1, len(self.order) + 1)
        return r


@dataclass
class SelectionTally:
    counts: np.ndarray
    iterations: int
    position_sums: np.ndarray = None


def _check(X, y, k):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise InputError("X must be 2-D with one label per row")
    if not np.all(np.isfinite(X)):
        raise InputError("X contains non-finite values; impute first")
    M = X.shape[1]
    k = M if k is None else int(k)
    if not 1 <= k <= M:
        raise InputError(f"k={k} outside 1..{M}")
    if len(np.unique(y)) < 2:
        raise InsufficientClassError("need two classes")
    return X, y, k


# -- mutual information --------------------------------------------------------

def equal_frequency_bins(x, n_bins=N_BINS):
    """Bin codes 0..n_bins-1 from ranks; tied values share a bin, so the
    coding is invariant to strictly monotone transforms."""
    x = np.asarray(x, dtype=float)
    r = rankdata(x, method="average", axis=0)
    return np.minimum(((r - 1.0) * n_bins / x.shape[0]).astype(np.int64), n_bins - 1)


def discrete_mi(a, b):
    """Mutual information (nats) between two non-negative integer codes."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    nb = int(b.max()) + 1
    joint = np.bincount(a * nb + b, minlength=(int(a.max()) + 1) * nb).reshape(-1, nb) / len(a)
    return _mi_from_joint(joint)


def _mi_from_joint(joint):
    pa = joint.sum(axis=-1, keepdims=True)
    pb = joint.sum(axis=-2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(joint > 0, joint * np.log(joint / (pa * pb)), 0.0)
    return t.sum(axis=(-2, -1))


def _mi_columns(B, b, n_bins):
    """MI between every column of code matrix B and the code vector b."""
    N, M = B.shape
    nb = int(b.max()) + 1
    codes = (np.arange(M)[None, :] * n_bins + B) * nb + b[:, None]
    joint = np.bincount(codes.ravel(), minlength=M * n_bins * nb).reshape(M, n_bins, nb) / N
    return _mi_from_joint(joint)


def mrmr_rank(X, y, k=None, n_bins=N_BINS) -> RankedFeatures:
    """Greedy mRMR with the difference (MID) criterion on equal-frequency bins."""
    X, y, k = _check(X, y, k)
    B = equal_frequency_bins(X, n_bins)
    yc = np.unique(y, return_inverse=True)[1].astype(np.int64)
    rel = _mi_columns(B, yc, n_bins)
    M = X.shape[1]
    red_sum = np.zeros(M)
    avail = np.ones(M, dtype=bool)
    order, scores = [], []
    for step in range(k):
        crit = rel - (red_sum / step if step else 0.0)
        crit = np.where(avail, crit, -np.inf)
        j = int(np.argmax(crit))
        order.append(j)
        scores.append(float(crit[j]))
        avail[j] = False
        if step + 1 < k:
            red_sum += _mi_columns(B, B[:, j], n_bins)
    return RankedFeatures(order, scores, "mRMR")


# -- Gram-Schmidt orthogonalization ---------------------------------------------

def _zscore(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    ok = sd > 0
    Z = np.zeros_like(X)
    Z[:, ok] = (X[:, ok] - mu[ok]) / sd[ok]
    return Z, ok


def gso_rank(X, y, k=None, tol=1e-10) -> RankedFeatures:
    """Forward selection by Gram-Schmidt orthogonalization.

    Each step picks the candidate whose residual (after projecting out the
    selected features) has the largest absolute correlation with the
    residual target; this is the least-squares forward-selection step.
    Candidates whose residual vanishes are skipped and appended at the end.
    """
    X, y, k = _check(X, y, k)
    N, M = X.shape
    R, ok = _zscore(X)
    t = np.asarray(y, dtype=float)
    t = t - t.mean()
    norms0 = np.sqrt((R ** 2).sum(axis=0))
    avail = ok.copy()
    order, scores = [], []
    while len(order) < k:
        nr = np.sqrt((R ** 2).sum(axis=0))
        live = avail & (nr > np.sqrt(tol) * np.maximum(norms0, 1.0))
        if not live.any():
            break
        tn = np.sqrt(t @ t)
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.where(live, np.abs(R.T @ t) / (nr * tn if tn > 0 else 1.0), -np.inf)
        j = int(np.argmax(corr))
        order.append(j)
        scores.append(float(corr[j]))
        avail[j] = False
        q = R[:, j] / nr[j]
        R = R - np.outer(q, q @ R)
        t = t - q * (q @ t)
    rest = [j for j in range(M) if j not in set(order)][: k - len(order)]
    return RankedFeatures(order + rest, scores + [0.0] * len(rest), "GSO")


# -- RELIEF --------------------------------------------------------------------------

def relief_weights(X, y):
    """RELIEF weights with one nearest hit and miss per instance, all
    instances used, features scaled to [0, 1]."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) != 2:
        raise InsufficientClassError("RELIEF needs exactly two classes")
    if counts.min() < 2:
        raise InsufficientClassError("each class needs at least 2 instances")
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    S = np.zeros_like(X)
    nz = span > 0
    S[:, nz] = (X[:, nz] - lo[nz]) / span[nz]
    N = len(S)
    w = np.zeros(X.shape[1])
    idx = np.arange(N)
    for i in range(N):
        d = ((S - S[i]) ** 2).sum(axis=1)
        same = (y == y[i]) & (idx != i)
        other = y != y[i]
        hit = int(np.flatnonzero(same)[np.argmin(d[same])])
        miss = int(np.flatnonzero(other)[np.argmin(d[other])])
        w += np.abs(S[i] - S[miss]) - np.abs(S[i] - S[hit])
    return w / N


def relief_rank(X, y, k=None) -> RankedFeatures:
    X, y, k = _check(X, y, k)
    w = relief_weights(X, y)
    order = np.lexsort((np.arange(len(w)), -w))[:k]
    return RankedFeatures(order, w[order], "RELIEF")


# -- LASSO ---------------------------------------------------------------------------

def lasso_grid(lam_max, steps=LASSO_STEPS, ratio=LASSO_RATIO):
    return lam_max * np.geomspace(1.0, ratio, steps)


def lasso_rank(X, y, k=None, steps=LASSO_STEPS, ratio=LASSO_RATIO,
               tol=LASSO_TOL, max_sweeps=LASSO_MAX_SWEEPS) -> RankedFeatures:
    """Rank by order of entry into the active set along the L1 path of the
    linear model on z-scored X and y coded -1/+1 (centred).

    Features entering at the same grid point are ordered by coefficient
    magnitude there; features never active follow by |correlation|.
    Scores are the penalty at which each feature entered (0 if never).
    """
    X, y, k = _check(X, y, k)
    N, M = X.shape
    Z, _ = _zscore(X)
    classes = np.unique(y)
    t = np.where(y == classes[-1], 1.0, -1.0)
    t = t - t.mean()
    G = (Z.T @ Z) / N
    c = (Z.T @ t) / N
    lam_max = float(np.max(np.abs(c)))
    entered, lam_at = [], {}
    # y orthogonal to every column (up to rounding): the path is empty
    if lam_max > 1e-12 * np.sqrt((t @ t) / N):
        lambdas = lasso_grid(lam_max, steps, ratio)
        # z-scored columns have G_jj = 1, so the criterion becomes a bound on |delta|
        step_tol = float(np.sqrt(tol * (t @ t) / N))
        coefs, status = kernels.lasso_path(G, c, lambdas, step_tol, int(max_sweeps))
        if status >= 0:
            raise ConvergenceError(
                f"coordinate descent did not converge within {max_sweeps} sweeps "
                f"at lambda={lambdas[status]:.6g}", lam=float(lambdas[status]))
        seen = np.zeros(M, dtype=bool)
        for li in range(len(lambdas)):
            new = np.flatnonzero((coefs[li] != 0) & ~seen)
            if len(new):
                new = new[np.lexsort((new, -np.abs(coefs[li, new])))]
                for j in new:
                    entered.append(int(j))
                    lam_at[int(j)] = float(lambdas[li])
                seen[new] = True
    rest = np.array([j for j in range(M) if j not in lam_at], dtype=np.int64)
    if len(rest):
        rest = rest[np.lexsort((rest, -np.abs(c[rest])))]
    order = np.concatenate([np.array(entered, dtype=np.int64), rest])[:k]
    scores = np.array([lam_at.get(int(j), 0.0) for j in order])
    return RankedFeatures(order, scores, "LASSO")


RANKERS = {"mRMR": mrmr_rank, "GSO": gso_rank, "RELIEF": relief_rank, "LASSO": lasso_rank}


# -- ensemble ------------------------------------------------------------------------

def ensemble_rank(rankings, n_features=None) -> RankedFeatures:
    """Borda aggregation: score = sum over rankings of (M - rank).

    Ties fall to the best single-ranking position, then to the lowest index.
    """
    rankings = list(rankings)
    if not rankings:
        raise InputError("no rankings to combine")
    sets = {frozenset(map(int, r.order)) for r in rankings}
    if len(sets) != 1:
        raise InputError("rankings cover different feature sets")
    M = n_features if n_features is not None else len(rankings[0].order)
    feats = np.array(sorted(next(iter(sets))), dtype=np.int64)
    R = np.stack([r.ranks(max(M, int(feats.max()) + 1))[feats] for r in rankings])
    borda = (M - R).sum(axis=0)
    best = R.min(axis=0)
    order = np.lexsort((feats, best, -borda))
    return RankedFeatures(feats[order], borda[order].astype(float), "Ensemble")


# -- protocol --------------------------------------------------------------------------

def balance_indices(y, rng):
    """Undersample every class to the minority size (uniform, without
    replacement); returned indices are sorted."""
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise InsufficientClassError("balancing needs two non-empty classes")
    n = counts.min()
    keep = [np.sort(rng.choice(np.flatnonzero(y == c), n, replace=False)) for c in classes]
    return np.sort(np.concatenate(keep))


def stratified_folds(y, folds, rng):
    """Fold id per row: each class is shuffled and dealt round-robin."""
    y = np.asarray(y)
    fold = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = (np.arange(len(idx)) + offset) % folds
        offset += len(idx)
    return fold


def iteration_seed(seed, rep):
    return np.random.SeedSequence([int(seed), int(rep)])


def selection_protocol(X, y, seed=0, reps=10, folds=10, top_k=100,
                       algorithms=ALGORITHMS, min_minority=20, ensemble=True):
    """Balance, split and rank ``reps`` x ``folds`` times; tally how often each
    feature lands in each algorithm's top ``top_k`` on the training portion.

    Missing values are imputed with training-portion medians.
    Returns (tallies, final) dicts keyed by algorithm (plus ``Ensemble``);
    each final ranking sorts features by descending count, then by the sum
    of their positions over all iterations, then by index.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    _, counts = np.unique(y, return_counts=True)
    if len(counts) < 2 or counts.min() < min_minority:
        raise ProtocolError(f"minority class has {0 if len(counts) < 2 else counts.min()} rows; "
                            f"need at least {min_minority}")
    N, M = X.shape
    k = min(top_k, M)
    names = list(algorithms) + (["Ensemble"] if ensemble else [])
    cnt = {a: np.zeros(M, dtype=np.int64) for a in names}
    pos = {a: np.zeros(M, dtype=np.int64) for a in names}
    for rep in range(reps):
        rng = np.random.default_rng(iteration_seed(seed, rep))
        keep = balance_indices(y, rng)
        fold = stratified_folds(y[keep], folds, rng)
        for f in range(folds):
            tr = keep[fold != f]
            Xtr = X[tr]
            if not np.all(np.isfinite(Xtr)):
                Xtr = impute(Xtr, fit_medians(Xtr))
            ranked = [RANKERS[a](Xtr, y[tr]) for a in algorithms]
            if ensemble:
                ranked.append(ensemble_rank(ranked, M))
            for a, r in zip(names, ranked):
                cnt[a][r.order[:k]] += 1
                pos[a] += r.ranks(M)
    iters = reps * folds
    tallies, final = {}, {}
    for a in names:
        tallies[a] = SelectionTally(cnt[a], iters, pos[a])
        order = np.lexsort((np.arange(M), pos[a], -cnt[a]))
        final[a] = RankedFeatures(order, cnt[a][order].astype(float), a)
    return tallies, final


# -- files ---------------------------------------------------------------------------

def write_ranking_csv(rankings, names, path, header_comment=None):
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("rank,feature_index,feature_name,score,algorithm\n")
        for r in rankings:
            for i, (j, s) in enumerate(zip(r.order, r.scores), start=1):
                fh.write(f"{i},{int(j)},{names[int(j)]},{repr(float(s))},{r.algorithm}\n")


def write_tally_csv(tally, names, path, header_comment=None):
    order = np.lexsort((np.arange(len(tally.counts)), -tally.counts))
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(f"feature_index,feature_name,count_of_{tally.iterations}\n")
        for j in order:
            fh.write(f"{int(j)},{names[int(j)]},{int(tally.counts[j])}\n")


def read_ranking_csv(path):
    """Rankings keyed by algorithm from a ranking CSV."""
    out = {}
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    for ln in lines[1:]:
        _, j, _, s, alg = ln.split(",")
        out.setdefault(alg, ([], []))
        out[alg][0].append(int(j))
        out[alg][1].append(float(s))
    return {a: RankedFeatures(o, s, a) for a, (o, s) in out.items()}

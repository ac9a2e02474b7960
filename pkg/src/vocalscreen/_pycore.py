"""Pure-Python/numpy twins of the compiled kernels in ``_core.pyx``.

Outputs are identical to the compiled versions; only speed differs.
"""
import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class _SplitMix64:
    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def next(self):
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)


def build_tree(X, y, weight, mtry, seed):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int8)
    weight = np.asarray(weight, dtype=np.float64)
    p = X.shape[1]
    rng = _SplitMix64(seed)
    feats = list(range(p))
    samples = np.flatnonzero(weight > 0)

    feature, threshold, left, right, w0s, w1s = [], [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        w0s.append(0.0)
        w1s.append(0.0)
        return len(feature) - 1

    stack = [(samples, new_node())]
    while stack:
        idx, node = stack.pop()
        is_pd = y[idx] == 1
        w = weight[idx]
        # weights are integer bootstrap counts, so these sums are exact
        w1 = float(w[is_pd].sum())
        w0 = float(w[~is_pd].sum())
        w0s[node] = w0
        w1s[node] = w1
        m = len(idx)
        if w0 == 0.0 or w1 == 0.0 or m < 2:
            continue

        best_f = -1
        best_score = -1.0
        best_thr = 0.0
        visited = 0
        nonconst = 0
        while visited < p and nonconst < mtry:
            r = visited + rng.next() % (p - visited)
            feats[visited], feats[r] = feats[r], feats[visited]
            f = feats[visited]
            visited += 1

            vals = X[idx, f]
            if vals.min() == vals.max():
                continue
            nonconst += 1
            order = np.lexsort((idx, vals))
            v = vals[order]
            wo = w[order]
            co = is_pd[order]
            l1 = np.cumsum(np.where(co, wo, 0.0))[:-1]
            l0 = np.cumsum(np.where(co, 0.0, wo))[:-1]
            valid = v[:-1] < v[1:]
            r0 = w0 - l0
            r1 = w1 - l1
            wl = l0 + l1
            wr = r0 + r1
            with np.errstate(divide="ignore", invalid="ignore"):
                score = (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr
            score = np.where(valid, score, -np.inf)
            i = int(np.argmax(score))
            if score[i] > best_score:
                best_score = float(score[i])
                best_f = f
                a = float(v[i])
                b = float(v[i + 1])
                thr = (a + b) * 0.5
                if thr >= b:
                    thr = a
                best_thr = thr

        if best_f < 0:
            continue

        go_left = X[idx, best_f] <= best_thr
        lid = new_node()
        rid = new_node()
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack.append((idx[~go_left], rid))
        stack.append((idx[go_left], lid))

    counts = np.column_stack([np.asarray(w0s, dtype=np.float64),
                              np.asarray(w1s, dtype=np.float64)])
    return (np.asarray(feature, dtype=np.int64), np.asarray(threshold, dtype=np.float64),
            np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64), counts)


def apply_tree(feature, threshold, left, right, X):
    X = np.asarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        nd = node[active]
        f = feature[nd]
        go_left = X[r, f] <= threshold[nd]
        node[r] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return node


def _soft(z, lam):
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def _update(j, G, r, b, lam):
    gjj = G[j, j]
    z = r[j] + gjj * b[j]
    bn = _soft(z, lam) / gjj
    d = bn - b[j]
    if d != 0.0:
        r -= d * G[j]
        b[j] = bn
    return abs(d)


def lasso_path(G, c, lambdas, tol, max_sweeps):
    G = np.ascontiguousarray(G, dtype=np.float64)
    p = G.shape[0]
    coefs = np.zeros((len(lambdas), p))
    b = np.zeros(p)
    r = np.array(c, dtype=np.float64)
    diag_ok = [j for j in range(p) if G[j, j] > 0.0]
    for li, lam in enumerate(lambdas):
        lam = float(lam)
        sweeps = 0
        converged = False
        while not converged:
            max_delta = 0.0
            for j in diag_ok:
                d = _update(j, G, r, b, lam)
                if d > max_delta:
                    max_delta = d
            sweeps += 1
            if max_delta < tol:
                converged = True
                break
            if sweeps >= max_sweeps:
                break
            while True:
                max_delta = 0.0
                for j in diag_ok:
                    if b[j] == 0.0:
                        continue
                    d = _update(j, G, r, b, lam)
                    if d > max_delta:
                        max_delta = d
                sweeps += 1
                if max_delta < tol or sweeps >= max_sweeps:
                    break
            if sweeps >= max_sweeps:
                break
        if not converged:
            return coefs, li
        coefs[li] = b
    return coefs, -1


def close_return_histogram(emb, eps, t_max):
    emb = np.asarray(emb, dtype=np.float64)
    n, dim = emb.shape
    eps2 = eps * eps
    hist = np.zeros(t_max + 1, dtype=np.int64)
    left = np.zeros(n, dtype=bool)
    done = np.zeros(n, dtype=bool)
    for lag in range(1, t_max + 1):
        m = n - lag
        if m <= 0:
            break
        d = np.zeros(m)
        for k in range(dim):
            diff = emb[lag:, k] - emb[:m, k]
            d = d + diff * diff
        open_ = ~done[:m]
        hit = open_ & left[:m] & (d < eps2)
        hist[lag] += int(hit.sum())
        done[:m] |= hit
        left[:m] |= open_ & (d >= eps2)
    return hist

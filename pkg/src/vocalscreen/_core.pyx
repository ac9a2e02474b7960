# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: CART tree growth, tree application, LASSO coordinate
descent and RPDE close-return histograms.

Every routine here has a line-for-line twin in ``_pycore`` and the two must
produce identical output for identical input.
"""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, realloc, free, qsort
from libc.stdint cimport uint64_t
from libc.math cimport fabs

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9
cdef uint64_t MIX2 = 0x94D049BB133111EB


cdef inline uint64_t splitmix64(uint64_t* state) noexcept nogil:
    state[0] += GOLDEN
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef struct SortItem:
    double value
    Py_ssize_t index


cdef int _cmp_items(const void* a, const void* b) noexcept nogil:
    cdef double va = (<SortItem*>a).value
    cdef double vb = (<SortItem*>b).value
    if va < vb:
        return -1
    if va > vb:
        return 1
    cdef Py_ssize_t ia = (<SortItem*>a).index
    cdef Py_ssize_t ib = (<SortItem*>b).index
    return (ia > ib) - (ia < ib)


cdef struct NodeBuf:
    Py_ssize_t n
    Py_ssize_t cap
    Py_ssize_t* feature
    double* threshold
    Py_ssize_t* left
    Py_ssize_t* right
    double* w0
    double* w1


cdef int _grow(NodeBuf* buf) noexcept nogil:
    cdef Py_ssize_t cap = buf.cap * 2 if buf.cap > 0 else 64
    buf.feature = <Py_ssize_t*>realloc(buf.feature, cap * sizeof(Py_ssize_t))
    buf.threshold = <double*>realloc(buf.threshold, cap * sizeof(double))
    buf.left = <Py_ssize_t*>realloc(buf.left, cap * sizeof(Py_ssize_t))
    buf.right = <Py_ssize_t*>realloc(buf.right, cap * sizeof(Py_ssize_t))
    buf.w0 = <double*>realloc(buf.w0, cap * sizeof(double))
    buf.w1 = <double*>realloc(buf.w1, cap * sizeof(double))
    if (buf.feature == NULL or buf.threshold == NULL or buf.left == NULL
            or buf.right == NULL or buf.w0 == NULL or buf.w1 == NULL):
        return -1
    buf.cap = cap
    return 0


cdef Py_ssize_t _new_node(NodeBuf* buf) noexcept nogil:
    if buf.n == buf.cap:
        if _grow(buf) != 0:
            return -1
    cdef Py_ssize_t i = buf.n
    buf.feature[i] = -1
    buf.threshold[i] = 0.0
    buf.left[i] = -1
    buf.right[i] = -1
    buf.w0[i] = 0.0
    buf.w1[i] = 0.0
    buf.n += 1
    return i


cdef int _build(const double[:, ::1] X, const cnp.int8_t[::1] y,
                const double[::1] weight, Py_ssize_t* samples, Py_ssize_t n_active,
                Py_ssize_t mtry, uint64_t seed, NodeBuf* buf) noexcept nogil:
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t* feats = <Py_ssize_t*>malloc(p * sizeof(Py_ssize_t))
    cdef SortItem* items = <SortItem*>malloc((n_active + 1) * sizeof(SortItem))
    # stack of (start, end, node)
    cdef Py_ssize_t* stack = <Py_ssize_t*>malloc(3 * (2 * n_active + 2) * sizeof(Py_ssize_t))
    cdef int status = -1
    if feats != NULL and items != NULL and stack != NULL:
        status = _build_loop(X, y, weight, samples, n_active, mtry, seed, buf,
                             feats, items, stack)
    free(feats)
    free(items)
    free(stack)
    return status


cdef int _build_loop(const double[:, ::1] X, const cnp.int8_t[::1] y,
                     const double[::1] weight, Py_ssize_t* samples, Py_ssize_t n_active,
                     Py_ssize_t mtry, uint64_t seed, NodeBuf* buf,
                     Py_ssize_t* feats, SortItem* items, Py_ssize_t* stack) noexcept nogil:
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t top = 0
    cdef uint64_t state = seed
    cdef Py_ssize_t i, j, k, f, start, end, node, m, visited, nonconst, r, tmp
    cdef Py_ssize_t best_f, lo, hi, lid, rid
    cdef double w0, w1, l0, l1, r0, r1, wl, wr, score, best_score, best_thr, v, vmin, vmax, thr, a, b

    for i in range(p):
        feats[i] = i

    node = _new_node(buf)
    if node < 0:
        return -1
    stack[0] = 0
    stack[1] = n_active
    stack[2] = node
    top = 1

    while top > 0:
        top -= 1
        start = stack[3 * top]
        end = stack[3 * top + 1]
        node = stack[3 * top + 2]
        w0 = 0.0
        w1 = 0.0
        for i in range(start, end):
            if y[samples[i]] == 1:
                w1 += weight[samples[i]]
            else:
                w0 += weight[samples[i]]
        buf.w0[node] = w0
        buf.w1[node] = w1
        m = end - start
        if w0 == 0.0 or w1 == 0.0 or m < 2:
            continue

        best_f = -1
        best_score = -1.0
        best_thr = 0.0
        visited = 0
        nonconst = 0
        while visited < p and nonconst < mtry:
            r = visited + <Py_ssize_t>(splitmix64(&state) % <uint64_t>(p - visited))
            tmp = feats[visited]
            feats[visited] = feats[r]
            feats[r] = tmp
            f = feats[visited]
            visited += 1

            vmin = X[samples[start], f]
            vmax = vmin
            for i in range(m):
                k = samples[start + i]
                v = X[k, f]
                items[i].value = v
                items[i].index = k
                if v < vmin:
                    vmin = v
                if v > vmax:
                    vmax = v
            if vmin == vmax:
                continue
            nonconst += 1
            qsort(items, m, sizeof(SortItem), _cmp_items)

            l0 = 0.0
            l1 = 0.0
            for i in range(m - 1):
                k = items[i].index
                if y[k] == 1:
                    l1 += weight[k]
                else:
                    l0 += weight[k]
                if items[i].value < items[i + 1].value:
                    r0 = w0 - l0
                    r1 = w1 - l1
                    wl = l0 + l1
                    wr = r0 + r1
                    score = (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr
                    if score > best_score:
                        best_score = score
                        best_f = f
                        a = items[i].value
                        b = items[i + 1].value
                        thr = (a + b) * 0.5
                        if thr >= b:
                            thr = a
                        best_thr = thr

        if best_f < 0:
            continue

        # partition samples[start:end] on the chosen split
        lo = start
        hi = end - 1
        while lo <= hi:
            if X[samples[lo], best_f] <= best_thr:
                lo += 1
            else:
                tmp = samples[lo]
                samples[lo] = samples[hi]
                samples[hi] = tmp
                hi -= 1

        lid = _new_node(buf)
        rid = _new_node(buf)
        if lid < 0 or rid < 0:
            return -1
        buf.feature[node] = best_f
        buf.threshold[node] = best_thr
        buf.left[node] = lid
        buf.right[node] = rid
        # right pushed first so the left subtree is grown first
        stack[3 * top] = lo
        stack[3 * top + 1] = end
        stack[3 * top + 2] = rid
        top += 1
        stack[3 * top] = start
        stack[3 * top + 1] = lo
        stack[3 * top + 2] = lid
        top += 1

    return 0


def build_tree(const double[:, ::1] X, const cnp.int8_t[::1] y, const double[::1] weight,
               Py_ssize_t mtry, uint64_t seed):
    """Grow one unpruned Gini tree; returns (feature, threshold, left, right, counts)."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i, n_active = 0
    cdef NodeBuf buf
    buf.n = 0
    buf.cap = 0
    buf.feature = NULL
    buf.threshold = NULL
    buf.left = NULL
    buf.right = NULL
    buf.w0 = NULL
    buf.w1 = NULL
    cdef Py_ssize_t* samples = <Py_ssize_t*>malloc((n + 1) * sizeof(Py_ssize_t))
    if samples == NULL:
        raise MemoryError()
    for i in range(n):
        if weight[i] > 0:
            samples[n_active] = i
            n_active += 1
    cdef int status
    with nogil:
        status = _build(X, y, weight, samples, n_active, mtry, seed, &buf)
    free(samples)
    if status != 0:
        free(buf.feature); free(buf.threshold); free(buf.left)
        free(buf.right); free(buf.w0); free(buf.w1)
        raise MemoryError()

    feature = np.empty(buf.n, dtype=np.int64)
    threshold = np.empty(buf.n, dtype=np.float64)
    left = np.empty(buf.n, dtype=np.int64)
    right = np.empty(buf.n, dtype=np.int64)
    counts = np.empty((buf.n, 2), dtype=np.float64)
    cdef cnp.int64_t[::1] fv = feature
    cdef double[::1] tv = threshold
    cdef cnp.int64_t[::1] lv = left
    cdef cnp.int64_t[::1] rv = right
    cdef double[:, ::1] cv = counts
    for i in range(buf.n):
        fv[i] = buf.feature[i]
        tv[i] = buf.threshold[i]
        lv[i] = buf.left[i]
        rv[i] = buf.right[i]
        cv[i, 0] = buf.w0[i]
        cv[i, 1] = buf.w1[i]
    free(buf.feature); free(buf.threshold); free(buf.left)
    free(buf.right); free(buf.w0); free(buf.w1)
    return feature, threshold, left, right, counts


def apply_tree(const cnp.int64_t[::1] feature, const double[::1] threshold,
               const cnp.int64_t[::1] left, const cnp.int64_t[::1] right,
               const double[:, ::1] X):
    """Leaf index reached by every row of X."""
    cdef Py_ssize_t n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] ov = out
    cdef Py_ssize_t i, node
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            ov[i] = node
    return out


cdef inline double _soft(double z, double lam) noexcept nogil:
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def lasso_path(const double[:, ::1] G, const double[::1] c, const double[::1] lambdas,
               double tol, Py_ssize_t max_sweeps):
    """Covariance-update coordinate descent along a decreasing lambda grid.

    Returns (coefs, status) where status is -1 on success, otherwise the index
    of the first lambda that failed to converge.
    """
    cdef Py_ssize_t p = G.shape[0]
    cdef Py_ssize_t n_lam = lambdas.shape[0]
    coefs = np.zeros((n_lam, p), dtype=np.float64)
    cdef double[:, ::1] cv = coefs
    cdef double* b = <double*>malloc(p * sizeof(double))
    cdef double* r = <double*>malloc(p * sizeof(double))
    if b == NULL or r == NULL:
        free(b); free(r)
        raise MemoryError()
    cdef Py_ssize_t li, j, k, sweeps
    cdef double lam, z, bn, d, max_delta
    cdef Py_ssize_t status = -1
    cdef bint converged
    with nogil:
        for j in range(p):
            b[j] = 0.0
            r[j] = c[j]
        for li in range(n_lam):
            lam = lambdas[li]
            sweeps = 0
            converged = False
            while not converged:
                # full sweep
                max_delta = 0.0
                for j in range(p):
                    if G[j, j] <= 0.0:
                        continue
                    z = r[j] + G[j, j] * b[j]
                    bn = _soft(z, lam) / G[j, j]
                    d = bn - b[j]
                    if d != 0.0:
                        for k in range(p):
                            r[k] -= d * G[j, k]
                        b[j] = bn
                        if fabs(d) > max_delta:
                            max_delta = fabs(d)
                sweeps += 1
                if max_delta < tol:
                    converged = True
                    break
                if sweeps >= max_sweeps:
                    break
                # active-set sweeps
                while True:
                    max_delta = 0.0
                    for j in range(p):
                        if b[j] == 0.0 or G[j, j] <= 0.0:
                            continue
                        z = r[j] + G[j, j] * b[j]
                        bn = _soft(z, lam) / G[j, j]
                        d = bn - b[j]
                        if d != 0.0:
                            for k in range(p):
                                r[k] -= d * G[j, k]
                            b[j] = bn
                            if fabs(d) > max_delta:
                                max_delta = fabs(d)
                    sweeps += 1
                    if max_delta < tol or sweeps >= max_sweeps:
                        break
                if sweeps >= max_sweeps:
                    break
            if not converged:
                status = li
                break
            for j in range(p):
                cv[li, j] = b[j]
    free(b)
    free(r)
    return coefs, status


def close_return_histogram(const double[:, ::1] emb, double eps, Py_ssize_t t_max):
    """Histogram of first close-return times in an embedded trajectory.

    A return is counted for point i at the first lag where the trajectory,
    having left the eps-ball around point i, comes back inside it.
    """
    cdef Py_ssize_t n = emb.shape[0]
    cdef Py_ssize_t dim = emb.shape[1]
    hist = np.zeros(t_max + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] hv = hist
    cdef double eps2 = eps * eps
    cdef Py_ssize_t i, lag, j, k
    cdef double d, diff
    cdef bint left
    with nogil:
        for i in range(n):
            left = False
            for lag in range(1, t_max + 1):
                j = i + lag
                if j >= n:
                    break
                d = 0.0
                for k in range(dim):
                    diff = emb[j, k] - emb[i, k]
                    d = d + diff * diff
                if not left:
                    if d >= eps2:
                        left = True
                elif d < eps2:
                    hv[lag] += 1
                    break
    return hist

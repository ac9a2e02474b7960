"""Cycle-to-cycle perturbation measures: jitter, shimmer, glottal quotient
and F0 summary statistics."""
from __future__ import annotations

import numpy as np

from ..errors import InsufficientCyclesError, UnvoicedRecordingError

MIN_CYCLES = 11
PERCENTILES = (5, 25, 50, 75, 95)
EXPECTED_F0 = {"M": 120.0, "F": 190.0, "Unknown": 155.0}


def tkeo(x):
    """Teager-Kaiser energy operator, x[n]^2 - x[n-1] x[n+1] (length n - 2)."""
    x = np.asarray(x, dtype=float)
    if len(x) < 3:
        return np.zeros(0)
    return x[1:-1] ** 2 - x[:-2] * x[2:]


def local_abs(x):
    return float(np.mean(np.abs(np.diff(x))))


def local_pct(x):
    return 100.0 * local_abs(x) / float(np.mean(x))


def pq(x, k):
    """k-point perturbation quotient in percent: mean absolute deviation of
    each value from its centred k-point moving average, over the mean."""
    x = np.asarray(x, dtype=float)
    h = k // 2
    if len(x) < k:
        return 0.0
    avg = np.convolve(x, np.ones(k) / k, mode="valid")
    return 100.0 * float(np.mean(np.abs(x[h:len(x) - h] - avg))) / float(np.mean(x))


def ddp(x):
    """Mean absolute difference of consecutive differences, in percent."""
    return 100.0 * float(np.mean(np.abs(np.diff(x, 2)))) / float(np.mean(x))


def _classic_jitter(x):
    return [local_pct(x), local_abs(x), pq(x, 3), pq(x, 5), ddp(x)]


def _tkeo_stats(x):
    t = tkeo(np.asarray(x, dtype=float) / np.mean(x))
    return [float(np.mean(t)), float(np.std(t))], list(np.percentile(t, PERCENTILES))


def _require(n, what):
    if n < MIN_CYCLES:
        raise InsufficientCyclesError(f"{what}: {n} values, need at least {MIN_CYCLES}")


def jitter_family(cycles, contour) -> np.ndarray:
    """28 period-perturbation measures from cycle periods and the voiced F0 frames."""
    p = np.asarray(cycles.periods, dtype=float)
    f0 = contour.voiced_f0()
    _require(len(p), "cycle periods")
    _require(len(f0), "voiced F0 frames")
    fp = 1.0 / f0
    tk_p, pct_p = _tkeo_stats(p)
    _, pct_f0 = _tkeo_stats(f0)
    df0 = np.abs(np.diff(f0))
    out = (_classic_jitter(p) + _classic_jitter(fp) + tk_p + pct_p + pct_f0
           + [pq(f0, 5), pq(f0, 11), float(df0.mean()), float(df0.std()),
              float(np.ptp(p) / p.mean()), float(np.ptp(f0) / f0.mean())])
    return np.asarray(out, dtype=float)


def shimmer_family(cycles) -> np.ndarray:
    """21 amplitude-perturbation measures; all are invariant to overall gain."""
    a = np.asarray(cycles.amplitudes, dtype=float)
    _require(len(a), "cycle amplitudes")
    if np.any(a <= 0):
        raise InsufficientCyclesError("cycle amplitudes must be positive")
    m = a.mean()
    db = 20.0 * np.log10(a[1:] / a[:-1])
    tk, tk_pct = _tkeo_stats(a)
    rel = np.abs(np.diff(a)) / m
    out = ([local_pct(a), float(np.mean(np.abs(db))), pq(a, 3), pq(a, 5), pq(a, 11), ddp(a)]
           + tk + tk_pct + list(np.percentile(rel, PERCENTILES))
           + [float(np.ptp(a) / m), float(a.std() / m), float(db.std())])
    return np.asarray(out, dtype=float)


def gq(contour, cycles) -> np.ndarray:
    """Spread of cycle durations: (p95 - p5) / median, and the standard
    deviations of the above- and below-median durations (seconds)."""
    p = np.asarray(cycles.periods, dtype=float)
    _require(len(p), "cycle periods")
    med = np.median(p)
    p5, p95 = np.percentile(p, [5, 95])
    hi = p[p > med]
    lo = p[p < med]
    return np.array([(p95 - p5) / med,
                     float(hi.std()) if len(hi) else 0.0,
                     float(lo.std()) if len(lo) else 0.0])


def expected_f0(sex, table=None):
    """Normative F0 for ``sex``; returns (value, pooled_fallback_used)."""
    table = dict(EXPECTED_F0 if table is None else table)
    if sex in ("M", "F") and sex in table:
        return float(table[sex]), False
    return float(table.get("Unknown", 0.5 * (table["M"] + table["F"]))), True


def f0_stats(contour, sex="Unknown", age=None, table=None):
    """(median F0 - expected F0, std F0, p95 - p5 of F0) and a pooled-norm flag.

    ``age`` is accepted for interface symmetry; the default norms are age-independent.
    """
    f0 = contour.voiced_f0()
    if len(f0) == 0:
        raise UnvoicedRecordingError("no voiced frames")
    ref, pooled = expected_f0(sex, table)
    p5, p95 = np.percentile(f0, [5, 95])
    return np.array([float(np.median(f0)) - ref, float(f0.std()), p95 - p5]), pooled

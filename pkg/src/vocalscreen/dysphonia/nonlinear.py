"""Nonlinear dynamics measures: RPDE, DFA and pitch period entropy."""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import DegenerateSignalError, TooShortError, UnvoicedRecordingError

RPDE_DIM = 4
RPDE_TAU = 10
RPDE_EPS = 0.12
RPDE_TMAX = 500
DFA_MIN_WINDOW = 50
DFA_N_SIZES = 20
PPE_BIN = 0.1
PPE_SPAN = 2.0


def embed(x, dim, tau):
    n = len(x) - (dim - 1) * tau
    if n <= 0:
        raise TooShortError("signal too short to embed")
    return np.column_stack([x[i * tau:i * tau + n] for i in range(dim)])


def rpde(rec, dim=RPDE_DIM, tau=RPDE_TAU, eps=RPDE_EPS, t_max=RPDE_TMAX) -> float:
    """Recurrence period density entropy, normalized by log(t_max).

    The signal is scaled to unit peak, delay-embedded, and for each point
    the first return into its ``eps``-ball (after having left it) is
    histogrammed. A signal with no returns at all is maximally uncertain
    and scores 1.
    """
    if rec.duration < 1.0:
        raise TooShortError(f"{rec.id}: RPDE needs at least 1 s")
    x = rec.samples
    if np.ptp(x) == 0:
        raise DegenerateSignalError(f"{rec.id}: constant signal")
    x = x / np.max(np.abs(x))
    hist = kernels.close_return_histogram(np.ascontiguousarray(embed(x, dim, tau)),
                                          float(eps), int(t_max))[1:]
    total = hist.sum()
    if total == 0:
        return 1.0
    p = hist[hist > 0] / total
    return float(min(1.0, max(0.0, -(p * np.log(p)).sum() / np.log(t_max))))


def dfa_fluctuations(x, min_window=DFA_MIN_WINDOW, n_sizes=DFA_N_SIZES):
    """Window sizes and RMS fluctuation of the linearly detrended profile."""
    x = np.asarray(x, dtype=float)
    N = len(x)
    if N // 4 <= min_window:
        raise TooShortError(f"DFA needs more than {4 * min_window} samples")
    sizes = np.unique(np.round(np.geomspace(min_window, N // 4, n_sizes)).astype(int))
    if len(sizes) < 10:
        raise TooShortError("fewer than 10 distinct DFA window sizes")
    y = np.cumsum(x - x.mean())
    F = np.empty(len(sizes))
    for i, n in enumerate(sizes):
        k = N // n
        Y = y[:k * n].reshape(k, n)
        t = np.arange(n) - (n - 1) / 2.0
        Yc = Y - Y.mean(axis=1, keepdims=True)
        slope = (Yc @ t) / (t @ t)
        resid = Yc - slope[:, None] * t[None, :]
        F[i] = np.sqrt(np.mean(resid ** 2))
    return sizes, F


def dfa(rec_or_x) -> float:
    """Detrended fluctuation scaling exponent (log-log least-squares slope)."""
    x = getattr(rec_or_x, "samples", rec_or_x)
    sizes, F = dfa_fluctuations(x)
    if np.any(F <= 0):
        raise DegenerateSignalError("zero fluctuation: constant signal")
    return float(np.polyfit(np.log(sizes), np.log(F), 1)[0])


def ppe(contour) -> float:
    """Pitch period entropy: normalized entropy of the order-2 linear
    prediction residual of the semitone F0 sequence, on fixed 0.1 semitone
    bins over +-2 semitones (outliers fall in the end bins)."""
    if hasattr(contour, "voiced_f0"):
        f0 = contour.voiced_f0()
    else:
        f0 = np.asarray(contour, dtype=float)
        f0 = f0[f0 > 0]
    if len(f0) < 3:
        raise UnvoicedRecordingError("PPE needs at least 3 voiced frames")
    s = 12.0 * np.log2(f0 / 440.0)
    s = s - s.mean()
    A = np.column_stack([s[1:-1], s[:-2]])
    coef, *_ = np.linalg.lstsq(A, s[2:], rcond=None)
    e = s[2:] - A @ coef
    n_bins = int(round(2 * PPE_SPAN / PPE_BIN))
    e = np.clip(e, -PPE_SPAN, PPE_SPAN)
    idx = np.clip(np.floor((e + PPE_SPAN) / PPE_BIN + 1e-9).astype(int), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    p = counts[counts > 0] / counts.sum()
    return float(min(1.0, max(0.0, -(p * np.log(p)).sum() / np.log(n_bins))))

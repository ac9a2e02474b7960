"""Empirical mode decomposition by cubic-spline envelope sifting."""
from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

SD_THRESHOLD = 0.2
MAX_IMFS = 10
MAX_SIFTS = 50


def extrema(x):
    """Indices of local maxima and minima (plateaus count once, at their start)."""
    d = np.diff(x)
    # collapse zero-slope runs so plateaus are judged by the slopes around them
    nz = np.flatnonzero(d != 0)
    if len(nz) < 2:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    s = np.sign(d[nz])
    turn = np.flatnonzero(s[:-1] != s[1:])
    idx = nz[turn] + 1
    maxima = idx[s[turn] > 0]
    minima = idx[s[turn] < 0]
    return maxima, minima


def _envelope(x, idx):
    n = len(x)
    # mirror the two outermost extrema about each signal end
    left = idx[:2]
    right = idx[-2:]
    t = np.concatenate([-left[::-1], idx, 2 * (n - 1) - right[::-1]])
    v = np.concatenate([x[left[::-1]], x[idx], x[right[::-1]]])
    t, keep = np.unique(t, return_index=True)
    return CubicSpline(t, v[keep])(np.arange(n))


def _is_residual(x):
    mx, mn = extrema(x)
    return len(mx) < 2 or len(mn) < 2


def sift(x, sd_threshold=SD_THRESHOLD, max_sifts=MAX_SIFTS):
    """Extract one intrinsic mode function from ``x``."""
    h = x.copy()
    for _ in range(max_sifts):
        mx, mn = extrema(h)
        if len(mx) < 2 or len(mn) < 2:
            break
        mean = 0.5 * (_envelope(h, mx) + _envelope(h, mn))
        h_new = h - mean
        denom = float(np.sum(h * h))
        sd = float(np.sum((h - h_new) ** 2)) / denom if denom > 0 else 0.0
        h = h_new
        if sd < sd_threshold:
            break
    return h


def emd(x, max_imfs=MAX_IMFS, sd_threshold=SD_THRESHOLD):
    """Decompose ``x`` into IMFs (rows, highest frequency first) and a residual.

    ``x == imfs.sum(0) + residual`` holds to rounding error.
    """
    r = np.asarray(x, dtype=float).copy()
    imfs = []
    while len(imfs) < max_imfs and not _is_residual(r):
        imf = sift(r, sd_threshold)
        imfs.append(imf)
        r = r - imf
    return np.array(imfs).reshape(len(imfs), len(r)), r

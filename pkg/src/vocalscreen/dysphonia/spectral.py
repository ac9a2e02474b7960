"""Mel-frequency cepstral coefficients with deltas."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct

from ..errors import TooShortError

FRAME = 0.025
HOP = 0.010
N_FILTERS = 20
N_CEPS = 13
DELTA_WIDTH = 2
_TINY = np.finfo(float).tiny


def hz2mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel2hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(n_filters, n_fft, fs, f_lo=0.0, f_hi=None):
    """Triangular filters on the mel scale, shape (n_filters, n_fft // 2 + 1)."""
    f_hi = fs / 2.0 if f_hi is None else f_hi
    edges = mel2hz(np.linspace(hz2mel(f_lo), hz2mel(f_hi), n_filters + 2))
    f = np.arange(n_fft // 2 + 1) * fs / n_fft
    fb = np.zeros((n_filters, len(f)))
    for i in range(n_filters):
        lo, c, hi = edges[i:i + 3]
        fb[i] = np.clip(np.minimum((f - lo) / (c - lo), (hi - f) / (hi - c)), 0.0, None)
    return fb


def deltas(c, width=DELTA_WIDTH):
    """Regression deltas over +-``width`` frames along axis 0, edges replicated."""
    n = np.arange(1, width + 1)
    pad = np.concatenate([np.repeat(c[:1], width, 0), c, np.repeat(c[-1:], width, 0)])
    T = len(c)
    num = sum(k * (pad[width + k:width + k + T] - pad[width - k:width - k + T]) for k in n)
    return num / (2.0 * float((n ** 2).sum()))


def mfcc_streams(x, fs):
    """(frames x 14) log energy followed by c0..c12."""
    L = int(round(FRAME * fs))
    h = int(round(HOP * fs))
    if len(x) < L + 4 * h:
        raise TooShortError("MFCC needs at least 5 frames")
    frames = sliding_window_view(np.asarray(x, dtype=float), L)[::h]
    n_fft = 1 << int(np.ceil(np.log2(L)))
    spec = np.abs(np.fft.rfft(frames * np.hamming(L), n_fft, axis=1)) ** 2
    fb = mel_filterbank(N_FILTERS, n_fft, fs)
    logmel = np.log(np.maximum(spec @ fb.T, _TINY))
    ceps = dct(logmel, type=2, norm="ortho", axis=1)[:, :N_CEPS]
    loge = np.log(np.maximum((frames ** 2).sum(axis=1), _TINY))
    return np.column_stack([loge, ceps])


def mfcc_family(rec) -> np.ndarray:
    """42 values: means of the 14 static, 14 delta and 14 delta-delta streams."""
    s = mfcc_streams(rec.samples, rec.sample_rate)
    d = deltas(s)
    dd = deltas(d)
    return np.concatenate([s.mean(0), d.mean(0), dd.mean(0)])

"""Periodized orthonormal Daubechies DWT and the F0-contour wavelet measures."""
from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np

from ..errors import TooShortError, UnvoicedRecordingError
from .perturbation import tkeo

LEVELS = 10
APPROX_LEVELS = 3
MIN_LENGTH = 1024
MIN_VOICED = 16


@lru_cache(maxsize=8)
def daubechies(p=4):
    """Lowpass decomposition filter of the Daubechies wavelet with ``p``
    vanishing moments (2p taps), by spectral factorization."""
    q = np.roots([comb(p - 1 + k, k) for k in range(p - 1, -1, -1)])
    zs = []
    for y in q:
        # y = -(z - 1)^2 / (4 z)  =>  z^2 - (2 - 4y) z + 1 = 0; keep the root inside the unit circle
        r = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        zs.append(r[np.argmin(np.abs(r))])
    h = np.real(np.poly(np.concatenate([zs, -np.ones(p)])))
    h = h * np.sqrt(2.0) / h.sum()
    return tuple(h[::-1])


def _filters(p):
    h = np.array(daubechies(p))
    g = h[::-1] * (-1.0) ** np.arange(len(h))
    return h, g


def dwt_step(a, p=4):
    """One periodized analysis step: (approximation, detail), each half length."""
    h, g = _filters(p)
    n = len(a)
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(len(h))[None, :]) % n
    seg = a[idx]
    return seg @ h, seg @ g


def idwt_step(ca, cd, p=4):
    h, g = _filters(p)
    n = 2 * len(ca)
    out = np.zeros(n)
    idx = (2 * np.arange(len(ca))[:, None] + np.arange(len(h))[None, :]) % n
    np.add.at(out, idx, ca[:, None] * h[None, :] + cd[:, None] * g[None, :])
    return out


def wavedec(x, levels=LEVELS, p=4):
    """Details d1..dL and approximations a1..aL of a length-2^k signal."""
    a = np.asarray(x, dtype=float)
    if len(a) % (1 << levels):
        raise TooShortError(f"length {len(a)} is not a multiple of 2^{levels}")
    details, approx = [], []
    for _ in range(levels):
        a, d = dwt_step(a, p)
        details.append(d)
        approx.append(a)
    return details, approx


def waverec(approx_last, details, p=4):
    a = approx_last
    for d in reversed(details):
        a = idwt_step(a, d, p)
    return a


def uniform_contour(contour, min_length=MIN_LENGTH):
    """Voiced F0 held across unvoiced gaps, edge-padded or truncated to the
    power of two nearest its length (at least ``min_length``)."""
    f0 = np.asarray(contour.f0, dtype=float)
    v = f0 > 0
    if not v.any():
        raise UnvoicedRecordingError("no voiced frames")
    if v.sum() < MIN_VOICED:
        raise TooShortError(f"wavelet measures need at least {MIN_VOICED} voiced frames")
    first, last = np.flatnonzero(v)[[0, -1]]
    seg = f0[first:last + 1]
    keep = np.flatnonzero(seg > 0)
    held = seg[keep[np.searchsorted(keep, np.arange(len(seg)), side="right") - 1]]
    n = max(min_length, 1 << int(round(np.log2(len(held)))))
    if len(held) >= n:
        return held[:n]
    return np.concatenate([held, np.full(n - len(held), held[-1])])


def vector_stats(c, tol=0.0):
    """energy, Shannon entropy, log-energy entropy, TKEO mean/std, max, min."""
    c = np.asarray(c, dtype=float)
    c2 = np.where(np.abs(c) > tol, c * c, 0.0)
    nz = c2[c2 > 0]
    t = tkeo(c)
    return [float(c2.sum()),
            float(-(nz * np.log(nz)).sum()),
            float(np.log(nz).sum()),
            float(t.mean()) if len(t) else 0.0,
            float(t.std()) if len(t) else 0.0,
            float(c.max()), float(c.min())]


def wavelet_family(contour) -> np.ndarray:
    """182 values: 7 statistics of details 1-10 and approximations 1-3 of
    the F0 contour and of log F0."""
    f0 = uniform_contour(contour)
    out = []
    for sig in (f0, np.log(f0)):
        details, approx = wavedec(sig)
        tol = 1e-10 * float(np.max(np.abs(sig)))
        for vec in details + approx[:APPROX_LEVELS]:
            out.extend(vector_stats(vec, tol))
    return np.asarray(out)

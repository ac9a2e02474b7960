"""Harmonic-to-noise and excitation measures: HNR/NHR, GNE, VFER and EMD-ER."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import solve_toeplitz
from scipy.signal import lfilter

from ..errors import InputError, TooShortError, UnvoicedRecordingError
from .emd import emd
from .perturbation import tkeo

HNR_CAP = 40.0
HNR_PERIODS = 4.5
BAND_WIDTH = 500.0
SPLIT_HZ = 2500.0
ENV_FRAME = 0.03
ENV_HOP = 0.01
ENV_MAX_LAG = 3
LPC_ORDER = 10
EMD_SPAN = 1.0
RATIO_MAX = 1e12


def _ratio(a, b):
    if a + b == 0:
        return 1.0
    if b <= 0:
        return RATIO_MAX
    return min(a / b, RATIO_MAX)


def _shannon(x):
    """Entropy of the normalized energy distribution of ``x``, scaled to [0, 1]."""
    e = np.asarray(x, dtype=float) ** 2
    tot = e.sum()
    if tot <= 0 or len(e) < 2:
        return 0.0
    p = e[e > 0] / tot
    return float(-(p * np.log(p)).sum() / np.log(len(e)))


def _require_duration(rec, seconds):
    if rec.duration < seconds:
        raise TooShortError(f"{rec.id}: {rec.duration:.2f} s is shorter than {seconds:g} s")


# -- HNR ---------------------------------------------------------------------

def _acf_at(P, lags, n_fft):
    """Autocorrelation from one-sided power spectra ``P`` (frames x bins) at
    fractional ``lags`` (frames x L), via the exact cosine series."""
    k = np.arange(P.shape[-1])
    w = np.full(P.shape[-1], 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    ph = np.cos(2 * np.pi * lags[..., None] * k / n_fft)
    return np.einsum("...lk,...k->...l", ph, P * w) / n_fft


def hnr_frames(rec, contour, periods=HNR_PERIODS, cap=HNR_CAP):
    """Per-voiced-frame normalized autocorrelation peak and HNR in dB.

    Each frame is mean-removed and Hann-windowed; its autocorrelation is
    divided by the window's own autocorrelation and the peak near the local
    period is located to sub-sample precision on the band-limited series.
    """
    fs = rec.sample_rate
    vi = np.flatnonzero(contour.voiced)
    if len(vi) == 0:
        raise UnvoicedRecordingError(f"{rec.id}: no voiced frames")
    W = int(round(periods * fs / contour.f0_min))
    W += W % 2
    n_fft = 1 << int(np.ceil(np.log2(2 * W)))
    x = np.concatenate([np.zeros(W), rec.samples, np.zeros(W)])
    starts = np.round(contour.times[vi] * fs).astype(int) + W - W // 2
    frames = x[starts[:, None] + np.arange(W)[None, :]]
    frames = frames - frames.mean(axis=1, keepdims=True)
    win = np.hanning(W + 2)[1:-1]
    P = np.abs(np.fft.rfft(frames * win, n_fft, axis=1)) ** 2
    Pw = np.abs(np.fft.rfft(win, n_fft)) ** 2
    r = np.fft.irfft(P, n_fft, axis=1)
    rw = np.fft.irfft(Pw, n_fft)
    e0 = r[:, 0].copy()
    ok = e0 > 0
    e0[~ok] = 1.0
    T = fs / contour.f0[vi]
    lo = np.maximum(2, np.floor(0.8 * T).astype(int))
    hi = np.minimum(W - 2, np.ceil(1.25 * T).astype(int))
    best = np.empty(len(vi))
    for i in range(len(vi)):
        lags = np.arange(lo[i], hi[i] + 1)
        if len(lags) == 0:
            best[i] = lo[i]
            continue
        rn = r[i, lags] / e0[i] / (rw[lags] / rw[0])
        best[i] = lags[int(np.argmax(rn))]
    # refine on a quarter-sample grid, then parabolic interpolation
    grid = best[:, None] + np.linspace(-1.0, 1.0, 9)[None, :]
    rg = _acf_at(P, grid, n_fft) / e0[:, None] / (_acf_at(Pw[None, :], grid, n_fft) / rw[0])
    j = np.clip(np.argmax(rg, axis=1), 1, 7)
    a = rg[np.arange(len(j)), j - 1]
    b = rg[np.arange(len(j)), j]
    c = rg[np.arange(len(j)), j + 1]
    denom = a - 2 * b + c
    with np.errstate(divide="ignore", invalid="ignore"):
        peak = np.where(denom < 0, b - 0.125 * (a - c) ** 2 / denom, b)
    peak = np.where(ok, peak, 0.0)
    lim = 1.0 / (1.0 + 10.0 ** (cap / 10.0))
    rmax = np.clip(peak, lim, 1.0 - lim)
    return rmax, 10.0 * np.log10(rmax / (1.0 - rmax))


def hnr_nhr(rec, contour) -> np.ndarray:
    """{mean HNR dB, std HNR dB, mean NHR, std NHR} over voiced frames."""
    r, h = hnr_frames(rec, contour)
    nhr = (1.0 - r) / r
    return np.array([h.mean(), h.std(), nhr.mean(), nhr.std()])


# -- band decomposition -------------------------------------------------------

def band_analytic(x, fs, width=BAND_WIDTH):
    """Analytic signals of raised-cosine bands centred every ``width`` Hz.

    The squared-cosine responses of neighbouring bands sum to one, so the
    bands partition the spectrum. Returns (bands x samples complex, centres).
    """
    n = len(x)
    centres = np.arange(width / 2, fs / 2, width)
    X = np.fft.fft(x)
    f = np.fft.fftfreq(n, 1.0 / fs)
    pos = f >= 0
    out = np.empty((len(centres), n), dtype=complex)
    for k, c in enumerate(centres):
        d = np.abs(f - c)
        H = np.where(pos & (d < width), np.cos(0.5 * np.pi * d / width) ** 2, 0.0)
        H[(f == 0)] *= 0.5
        out[k] = np.fft.ifft(2.0 * X * H)
    return out, centres


def envelope_correlation(env, fs, frame=ENV_FRAME, hop=ENV_HOP, max_lag=ENV_MAX_LAG):
    """Per-frame maximum normalized cross-correlation between Hilbert
    envelopes of bands at least two bands apart (non-overlapping responses)."""
    L = int(round(frame * fs))
    h = int(round(hop * fs))
    nb, n = env.shape
    if n < L + 2 * max_lag:
        raise TooShortError("signal shorter than one envelope frame")
    V = sliding_window_view(env, L + 2 * max_lag, axis=1)[:, ::h]  # bands x frames x (L+2m)
    core = V[:, :, max_lag:max_lag + L]
    core = core - core.mean(axis=2, keepdims=True)
    core_n = np.sqrt((core ** 2).sum(axis=2))
    best = np.zeros(V.shape[1])
    for i in range(nb):
        for j in range(i + 2, nb):
            for lag in range(-max_lag, max_lag + 1):
                sj = V[j, :, max_lag + lag:max_lag + lag + L]
                sj = sj - sj.mean(axis=1, keepdims=True)
                den = core_n[i] * np.sqrt((sj ** 2).sum(axis=1))
                num = (core[i] * sj).sum(axis=1)
                with np.errstate(invalid="ignore", divide="ignore"):
                    c = np.where(den > 0, num / den, 0.0)
                best = np.maximum(best, c)
    return best


def _split_ratios(bands, centres, split=SPLIT_HZ):
    """Signal-to-noise and noise-to-signal ratios of (energy, mean |TKEO|,
    entropy), with bands below ``split`` as signal and above as noise."""
    low = centres < split
    e = (bands ** 2).sum(axis=1)
    t = np.array([np.mean(np.abs(tkeo(b))) for b in bands])
    h = np.array([_shannon(b) for b in bands])
    pairs = [(e[low].sum(), e[~low].sum()), (t[low].sum(), t[~low].sum()),
             (h[low].mean(), h[~low].mean())]
    return [_ratio(a, b) for a, b in pairs], [_ratio(b, a) for a, b in pairs]


def _check_rate(rec):
    if rec.sample_rate / 2 <= SPLIT_HZ:
        raise InputError(f"{rec.id}: sample rate {rec.sample_rate} Hz has no band above {SPLIT_HZ:g} Hz")


def lpc(x, order=LPC_ORDER):
    """Autocorrelation-method LPC polynomial [1, a1, ..., ap]."""
    xw = x * np.hanning(len(x))
    r = np.fft.irfft(np.abs(np.fft.rfft(xw, 2 * len(xw))) ** 2)[:order + 1]
    if r[0] <= 0:
        return np.concatenate([[1.0], np.zeros(order)])
    r = r.copy()
    r[0] *= 1.0 + 1e-9
    a = solve_toeplitz(r[:order], -r[1:order + 1])
    return np.concatenate([[1.0], a])


def gne_family(rec) -> np.ndarray:
    """6 glottal-to-noise excitation measures on the LPC residual."""
    _require_duration(rec, 1.0)
    _check_rate(rec)
    exc = lfilter(lpc(rec.samples), [1.0], rec.samples)
    bands, centres = band_analytic(exc, rec.sample_rate)
    g = envelope_correlation(np.abs(bands), rec.sample_rate)
    snr, nsr = _split_ratios(bands.real, centres)
    return np.array([g.mean(), g.std(), snr[0], snr[1], nsr[0], nsr[1]])


def vfer_family(rec) -> np.ndarray:
    """9 vocal-fold excitation ratio measures on the 500 Hz bands of the signal."""
    _require_duration(rec, 1.0)
    _check_rate(rec)
    bands, centres = band_analytic(rec.samples, rec.sample_rate)
    v = envelope_correlation(np.abs(bands), rec.sample_rate)
    e = (bands.real ** 2).sum(axis=1)
    p = e / e.sum() if e.sum() > 0 else np.full(len(e), 1.0 / len(e))
    nz = p[p > 0]
    spread = float(-(nz * np.log(nz)).sum() / np.log(len(p)))
    snr, nsr = _split_ratios(bands.real, centres)
    return np.array([v.mean(), v.std(), spread] + snr + nsr)


def emd_er_family(rec, span=EMD_SPAN) -> np.ndarray:
    """6 EMD excitation ratios: IMFs 1-2 are noise, the rest plus residual signal.

    Only the central ``span`` seconds are decomposed to bound the cost.
    """
    _require_duration(rec, 1.0)
    n = int(round(span * rec.sample_rate))
    a = max(0, (len(rec.samples) - n) // 2)
    x = rec.samples[a:a + n]
    imfs, res = emd(x)
    noise = imfs[:2].sum(axis=0) if len(imfs) else np.zeros_like(x)
    signal = x - noise
    pairs = [(float(signal @ signal), float(noise @ noise)),
             (float(np.mean(np.abs(tkeo(signal)))), float(np.mean(np.abs(tkeo(noise))))),
             (_shannon(signal), _shannon(noise))]
    return np.array([_ratio(a, b) for a, b in pairs] + [_ratio(b, a) for a, b in pairs])

"""F0 contour estimation and glottal cycle marking.

``estimate_f0`` follows the SWIPE' design: sawtooth-inspired spectral
kernels built from the first and prime harmonics, evaluated on an ERB-spaced
loudness spectrum across several power-of-two windows, with the per-window
strengths blended by each candidate's distance to the window's optimal pitch.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import resample_poly

from .audio_io import Recording
from .errors import InputError, TooShortError, UnvoicedRecordingError

F0_MIN = 70.0
F0_MAX = 400.0
HOP = 0.01
VOICING_THRESHOLD = 0.3
DLOG2P = 1.0 / 96
DERBS = 0.1
WINDOW_OVERLAP = 0.5
UPSAMPLE = 4


@dataclass
class F0Contour:
    times: np.ndarray
    f0: np.ndarray
    strength: np.ndarray
    hop: float
    f0_min: float = F0_MIN
    f0_max: float = F0_MAX

    @property
    def voiced(self) -> np.ndarray:
        return self.f0 > 0

    def voiced_f0(self) -> np.ndarray:
        return self.f0[self.voiced]


@dataclass
class CycleSequence:
    periods: np.ndarray
    amplitudes: np.ndarray

    def __len__(self):
        return len(self.periods)


def hz2erbs(hz):
    return 6.44 * (np.log2(229.0 + hz) - 7.84)


def erbs2hz(erbs):
    return 2.0 ** (erbs / 6.44 + 7.84) - 229.0


def _primes_upto(n):
    if n < 2:
        return []
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for i in range(2, int(n ** 0.5) + 1):
        if sieve[i]:
            sieve[i * i::i] = False
    return list(np.flatnonzero(sieve))


def _kernel(freqs, pc):
    """Pitch-strength kernel of one candidate over ERB-spaced frequencies."""
    n = int(freqs[-1] / pc - 0.75)
    if n == 0:
        return None
    k = np.zeros_like(freqs)
    q = freqs / pc
    for i in [1] + _primes_upto(n):
        a = np.abs(q - i)
        peak = a < 0.25
        k[peak] = np.cos(2 * np.pi * q[peak])
        valley = (a > 0.25) & (a < 0.75)
        k[valley] += np.cos(2 * np.pi * q[valley]) / 2
    k *= np.sqrt(1.0 / freqs)
    k /= np.linalg.norm(k[k > 0])
    return k


@lru_cache(maxsize=16)
def _plan(fs, f0_min, f0_max, dlog2p, derbs):
    log2pc = np.arange(np.log2(f0_min), np.log2(f0_max) + 1e-12, dlog2p)
    pc = 2.0 ** log2pc
    log_ws = np.round(np.log2(8.0 * fs / np.array([f0_min, f0_max]))).astype(int)
    ws = 2 ** np.arange(log_ws[0], log_ws[1] - 1, -1)
    p_opt = 8.0 * fs / ws
    d = 1.0 + log2pc - np.log2(8.0 * fs / ws[0])
    ferbs_all = erbs2hz(np.arange(hz2erbs(pc.min() / 4), hz2erbs(fs / 2.0), derbs))
    windows = []
    for i in range(len(ws)):
        ii = i + 1  # 1-based window index in the blending rule
        if len(ws) == 1:
            j = np.arange(len(pc))
            k = np.array([], dtype=int)
        elif ii == len(ws):
            j = np.flatnonzero(d - ii > -1)
            k = np.flatnonzero(d[j] - ii < 0)
        elif ii == 1:
            j = np.flatnonzero(d - ii < 1)
            k = np.flatnonzero(d[j] - ii > 0)
        else:
            j = np.flatnonzero(np.abs(d - ii) < 1)
            k = np.arange(len(j))
        if len(j) == 0:
            continue
        freqs = ferbs_all[np.argmax(ferbs_all > pc[j[0]] / 4):]
        rows, keep = [], []
        for jj in j:
            kern = _kernel(freqs, pc[jj])
            if kern is not None:
                rows.append(kern)
                keep.append(jj)
        mu = np.ones(len(j))
        mu[k] = 1.0 - np.abs(d[j[k]] - ii)
        keep_mask = np.isin(j, keep)
        windows.append(dict(ws=int(ws[i]), hop=max(1, int(round(8 * (1 - WINDOW_OVERLAP) * fs / p_opt[i]))),
                            j=j[keep_mask], mu=mu[keep_mask], freqs=freqs, K=np.array(rows)))
    return pc, int(ws[0]), windows


def _loudness(x, fs, win):
    ws, dn = win["ws"], win["hop"]
    xzp = np.concatenate([np.zeros(ws // 2), x, np.zeros(dn + ws // 2)])
    n_cols = (len(xzp) - (ws - dn)) // dn
    idx = np.arange(ws)[None, :] + dn * np.arange(n_cols)[:, None]
    hann = 0.5 * (1 - np.cos(2 * np.pi * np.arange(1, ws + 1) / (ws + 1)))
    spec = np.abs(np.fft.rfft(xzp[idx] * hann, axis=1)).T
    f = np.arange(ws // 2 + 1) * fs / ws
    ti = np.arange(n_cols) * dn / fs
    L = np.sqrt(np.maximum(0.0, CubicSpline(f, spec, axis=0)(win["freqs"])))
    return L, ti


def strength_matrix(x, fs, times, f0_min=F0_MIN, f0_max=F0_MAX, dlog2p=DLOG2P, derbs=DERBS):
    """Blended pitch strength, shape (n_candidates, n_times), plus candidates."""
    pc, _, windows = _plan(fs, f0_min, f0_max, dlog2p, derbs)
    S = np.zeros((len(pc), len(times)))
    for win in windows:
        L, ti = _loudness(x, fs, win)
        norms = np.sqrt((L * L).sum(axis=0))
        with np.errstate(invalid="ignore", divide="ignore"):
            L = L / norms
        Si = win["K"] @ L
        if Si.shape[1] > 1:
            Si_t = np.empty((Si.shape[0], len(times)))
            for r in range(Si.shape[0]):
                Si_t[r] = np.interp(times, ti, Si[r], left=np.nan, right=np.nan)
        else:
            Si_t = np.full((Si.shape[0], len(times)), np.nan)
        S[win["j"]] += win["mu"][:, None] * Si_t
    return S, pc


def estimate_f0(rec: Recording, f0_min: float = F0_MIN, f0_max: float = F0_MAX,
                hop: float = HOP, threshold: float = VOICING_THRESHOLD,
                dlog2p: float = DLOG2P, refine: bool = True) -> F0Contour:
    """SWIPE'-style F0 contour; frames with strength below ``threshold`` get f0 = 0.

    With ``refine`` each voiced estimate is polished by :func:`refine_f0`,
    which removes the upward bias the kernel normalization gives pure tones.
    """
    fs = rec.sample_rate
    if not 0 < f0_min < f0_max:
        raise InputError("need 0 < f0_min < f0_max")
    if f0_max >= fs / 2:
        raise InputError("f0_max must be below the Nyquist frequency")
    x = rec.samples
    _, longest, _ = _plan(fs, float(f0_min), float(f0_max), float(dlog2p), DERBS)
    if len(x) < longest:
        raise TooShortError(f"{rec.id}: {len(x)} samples is shorter than one {longest}-sample window")
    n_t = int(np.floor(len(x) / fs / hop + 1e-9)) + 1
    times = np.arange(n_t) * hop
    S, pc = strength_matrix(x, fs, times, float(f0_min), float(f0_max), float(dlog2p))

    valid = ~np.all(np.isnan(S), axis=0)
    S_filled = np.where(np.isnan(S), -np.inf, S)
    best = np.argmax(S_filled, axis=0)
    s = np.where(valid, S_filled[best, np.arange(n_t)], 0.0)
    f0 = pc[best].copy()

    # parabolic refinement in the normalized-period domain on a 1-cent grid
    inner = valid & (best > 0) & (best < len(pc) - 1)
    cols = np.flatnonzero(inner)
    if len(cols):
        i = best[cols]
        I = np.stack([i - 1, i, i + 1])
        tc = 1.0 / pc[I]
        ntc = (tc / tc[1] - 1.0) * 2 * np.pi
        ys = np.nan_to_num(S[I, cols[None, :]], nan=-1.0)
        grid = np.arange(int(round(2 * dlog2p * 1200)) + 1) / 1200.0
        log2_lo = np.log2(pc[I[0]])
        ftc = 1.0 / 2.0 ** (log2_lo[:, None] + grid[None, :])
        nftc = (ftc / tc[1][:, None] - 1.0) * 2 * np.pi
        vals = np.empty_like(nftc)
        for c in range(len(cols)):
            coef = np.polyfit(ntc[:, c], ys[:, c], 2)
            vals[c] = np.polyval(coef, nftc[c])
        kbest = np.argmax(vals, axis=1)
        s[cols] = vals[np.arange(len(cols)), kbest]
        f0[cols] = 2.0 ** (log2_lo + grid[kbest])

    voiced = (s >= threshold) & valid
    if refine:
        f0[voiced] = refine_f0(x, fs, times[voiced], f0[voiced])
    f0 = np.clip(f0, f0_min, f0_max)
    f0[~voiced] = 0.0
    strength = np.clip(np.nan_to_num(s, nan=0.0), 0.0, 1.0)
    return F0Contour(times, f0, strength, hop, float(f0_min), float(f0_max))


def refine_f0(x, fs, times, f0, search=0.05, n_periods=3):
    """Polish F0 estimates by maximizing the normalized cross-correlation
    between a window and its copy one period later, within ``search`` of
    the coarse period; the peak lag is parabolically interpolated."""
    out = np.array(f0, dtype=float)
    n = len(x)
    for k, (tc, fc) in enumerate(zip(times, f0)):
        T = fs / fc
        lags = np.arange(int(np.floor(T * (1 - search))), int(np.ceil(T * (1 + search))) + 1)
        W = int(np.ceil(n_periods * T))
        a = int(round(tc * fs - (W + lags[-1]) / 2))
        a = min(max(a, 0), n - W - lags[-1] - 1)
        if a < 0 or len(lags) < 3:
            continue
        ref = x[a:a + W]
        e_ref = ref @ ref
        idx = a + lags[:, None] + np.arange(W)[None, :]
        seg = x[idx]
        num = seg @ ref
        den = np.sqrt(e_ref * np.einsum("ij,ij->i", seg, seg))
        if not np.all(den > 0):
            continue
        r = num / den
        i = int(np.argmax(r))
        if i == 0 or i == len(r) - 1:
            continue
        lag, _ = _parabolic_peak(r, i)
        out[k] = fs / (lags[0] + lag)
    return out


def voiced_segments(contour: F0Contour):
    """(start_s, stop_s, frame_indices) for each run of voiced frames."""
    v = contour.voiced.astype(int)
    edges = np.diff(np.concatenate([[0], v, [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    half = contour.hop / 2
    return [(contour.times[a] - half, contour.times[b - 1] + half, np.arange(a, b))
            for a, b in zip(starts, stops)]


def _parabolic_peak(y, i):
    if i <= 0 or i >= len(y) - 1:
        return float(i), float(y[i])
    a, b, c = y[i - 1], y[i], y[i + 1]
    denom = a - 2 * b + c
    if denom >= 0:
        return float(i), float(b)
    off = 0.5 * (a - c) / denom
    return i + off, b - 0.25 * (a - c) * off


def extract_cycles(rec: Recording, contour: F0Contour) -> CycleSequence:
    """Mark successive waveform peaks guided by the local F0.

    Each next mark is the maximum in 0.8-1.25 local periods after the current
    one, located to sub-sample precision on a 4x band-limited upsampling.
    Peaks are taken on the dominant polarity of the waveform. Cycles never
    bridge unvoiced gaps.
    """
    segments = voiced_segments(contour)
    if not segments:
        raise UnvoicedRecordingError(f"{rec.id}: no voiced frames")
    fs_u = rec.sample_rate * UPSAMPLE
    xu = resample_poly(rec.samples, UPSAMPLE, 1)
    if -xu.min() > xu.max():
        xu = -xu
    n = len(xu)
    periods, amps = [], []
    for t0, t1, frames in segments:
        ft = contour.times[frames]
        ff = contour.f0[frames]
        lo = max(0, int(np.floor(t0 * fs_u)))
        hi = min(n, int(np.ceil(t1 * fs_u)))
        if hi - lo < 3:
            continue
        first_T = 1.0 / np.interp(t0, ft, ff)
        end = min(hi, lo + int(np.ceil(first_T * fs_u)) + 1)
        i = lo + int(np.argmax(xu[lo:end]))
        mark, peak = _parabolic_peak(xu, i)
        while True:
            T = fs_u / np.interp(mark / fs_u, ft, ff)
            a = int(np.ceil(mark + 0.8 * T))
            b = int(np.floor(mark + 1.25 * T)) + 1
            if b > hi or a >= b:
                break
            i = a + int(np.argmax(xu[a:b]))
            nxt, npk = _parabolic_peak(xu, i)
            periods.append((nxt - mark) / fs_u)
            amps.append(abs(peak))
            mark, peak = nxt, npk
    if not periods:
        raise UnvoicedRecordingError(f"{rec.id}: no complete cycles in voiced regions")
    return CycleSequence(np.array(periods), np.array(amps))

"""Synthetic sustained vowels with known jitter, shimmer, HNR and F0 drift.

The waveform is a Rosenberg glottal pulse train (differentiated for lip
radiation), colored by two fixed /a/-like resonances and mixed with white
noise whose power is set from the measured harmonic power, so the emitted
harmonics-to-noise ratio is exact by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.signal import lfilter, resample_poly

from .audio_io import Recording
from .errors import SpecError

OVERSAMPLE = 8
PREROLL = 0.1
RESONANCES = ((700.0, 130.0), (1200.0, 70.0))  # (centre Hz, bandwidth Hz)
OPEN_QUOTIENT = 0.4
CLOSE_QUOTIENT = 0.16
PEAK_LEVEL = 0.5


@dataclass(frozen=True)
class SynthSpec:
    f0: float = 120.0
    duration: float = 3.0
    sample_rate: int = 8000
    jitter_pct: float = 0.0
    shimmer_pct: float = 0.0
    hnr_db: float = 30.0
    f0_drift: float = 0.0
    seed: int = 0

    def validate(self):
        if not 70.0 <= self.f0 <= 400.0:
            raise SpecError(f"f0 {self.f0} Hz outside [70, 400]")
        if self.f0 > self.sample_rate / 4:
            raise SpecError(f"f0 {self.f0} Hz leaves no harmonic budget at {self.sample_rate} Hz")
        if self.duration <= 0:
            raise SpecError("duration must be positive")
        if self.jitter_pct < 0 or self.shimmer_pct < 0:
            raise SpecError("jitter_pct and shimmer_pct must be non-negative")
        end_f0 = self.f0 + self.f0_drift * self.duration
        if end_f0 <= 0 or end_f0 > self.sample_rate / 4:
            raise SpecError("f0 drift leaves the feasible range")


def rosenberg(tau):
    """Rosenberg-style glottal flow pulse over one normalized cycle ``tau`` in [0, 1).

    The closing phase is a squared cosine so the flow derivative stays
    continuous at closure; that keeps aliasing out of the 8 kHz band.
    """
    tp, tn = OPEN_QUOTIENT, CLOSE_QUOTIENT
    g = np.zeros_like(tau)
    rise = tau < tp
    g[rise] = 0.5 * (1.0 - np.cos(np.pi * tau[rise] / tp))
    fall = (tau >= tp) & (tau < tp + tn)
    g[fall] = np.cos(0.5 * np.pi * (tau[fall] - tp) / tn) ** 2
    return g


def cycle_plan(spec: SynthSpec, rng, span: float):
    """Onsets, periods and amplitudes of every glottal cycle covering ``span`` seconds."""
    onsets, periods, amps = [], [], []
    t = -PREROLL
    nominal_min = 0.5 / max(spec.f0, spec.f0 + spec.f0_drift * spec.duration)
    while t < span:
        f = spec.f0 + spec.f0_drift * max(t, 0.0)
        period = (1.0 / f) * (1.0 + spec.jitter_pct / 100.0 * rng.standard_normal())
        amp = 1.0 + spec.shimmer_pct / 100.0 * rng.standard_normal()
        period = max(period, nominal_min)
        onsets.append(t)
        periods.append(period)
        amps.append(max(amp, 0.05))
        t += period
    return np.array(onsets), np.array(periods), np.array(amps)


def harmonic_part(spec: SynthSpec, rng) -> np.ndarray:
    fs = spec.sample_rate
    n_out = int(round(spec.duration * fs))
    n_pre = int(round(PREROLL * fs))
    fs_hi = fs * OVERSAMPLE
    onsets, periods, amps = cycle_plan(spec, rng, spec.duration + 2.0 / spec.f0)

    t_hi = -PREROLL + np.arange((n_out + n_pre + 1) * OVERSAMPLE) / fs_hi
    idx = np.clip(np.searchsorted(onsets, t_hi, side="right") - 1, 0, len(onsets) - 1)
    tau = (t_hi - onsets[idx]) / periods[idx]
    flow = amps[idx] * rosenberg(tau)
    source = np.diff(flow, prepend=0.0)
    source = resample_poly(source, 1, OVERSAMPLE)

    y = source
    for centre, bw in RESONANCES:
        r = math.exp(-math.pi * bw / fs)
        a = [1.0, -2.0 * r * math.cos(2.0 * math.pi * centre / fs), r * r]
        y = lfilter([1.0 - r], a, y)
    y = y[n_pre:n_pre + n_out]
    return PEAK_LEVEL * y / np.max(np.abs(y))


def synthesize(spec: SynthSpec, id: str = "synth", label: str = "Unknown",
               age: Optional[float] = None, sex: str = "Unknown",
               return_parts: bool = False):
    """Render ``spec`` as a Recording (deterministic per ``spec.seed``).

    With ``return_parts=True`` also returns the harmonic and noise components.
    ``hnr_db = inf`` gives a noiseless signal.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    h = harmonic_part(spec, rng)
    if math.isinf(spec.hnr_db) and spec.hnr_db > 0:
        noise = np.zeros_like(h)
    else:
        noise = rng.standard_normal(len(h))
        p_h = np.mean(h ** 2)
        p_n = np.mean(noise ** 2)
        noise *= math.sqrt(p_h / (p_n * 10.0 ** (spec.hnr_db / 10.0)))
    rec = Recording(id, h + noise, spec.sample_rate, label=label, age=age, sex=sex)
    if return_parts:
        return rec, h, noise
    return rec


def parse_spec(text: str, base: SynthSpec = SynthSpec()) -> SynthSpec:
    """Parse ``"jitter=2,shimmer=6,hnr=10"`` style overrides onto ``base``."""
    aliases = {"jitter": "jitter_pct", "shimmer": "shimmer_pct", "hnr": "hnr_db",
               "drift": "f0_drift"}
    kwargs = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, _, val = part.partition("=")
        key = aliases.get(key.strip(), key.strip())
        if key not in SynthSpec.__dataclass_fields__:
            raise SpecError(f"unknown synth parameter {key!r}")
        kwargs[key] = int(val) if key in ("seed", "sample_rate") else float(val)
    return replace(base, **kwargs)


HC_DEFAULT = SynthSpec(jitter_pct=0.5, shimmer_pct=3.0, hnr_db=25.0)
PD_DEFAULT = SynthSpec(jitter_pct=2.0, shimmer_pct=8.0, hnr_db=10.0)


@dataclass
class CohortMember:
    recording: Recording
    spec: SynthSpec
    meta: dict = field(default_factory=dict)


def synth_cohort(n_per_class: int, pd_spec: SynthSpec = PD_DEFAULT,
                 hc_spec: SynthSpec = HC_DEFAULT, seed: int = 0,
                 spread: float = 0.25) -> list[CohortMember]:
    """Two labelled cohorts with per-speaker variation around each cohort spec.

    Each speaker draws sex (44% female), age, a sex-typical F0 and
    log-normally scattered jitter/shimmer (``spread`` is the log-sd) with
    HNR scattered by 2 dB around the cohort value.
    """
    rng = np.random.default_rng(seed)
    members = []
    for label, base, age_mu, age_sd in (("PD", pd_spec, 63.0, 11.0), ("HC", hc_spec, 48.0, 16.0)):
        for i in range(n_per_class):
            sex = "F" if rng.random() < 0.44 else "M"
            age = float(np.clip(np.round(rng.normal(age_mu, age_sd)), 18, 90))
            f0 = (195.0 if sex == "F" else 120.0) * math.exp(rng.normal(0.0, 0.1))
            spec = replace(
                base,
                f0=float(np.clip(f0, 75.0, 380.0)),
                jitter_pct=base.jitter_pct * math.exp(rng.normal(0.0, spread)),
                shimmer_pct=base.shimmer_pct * math.exp(rng.normal(0.0, spread)),
                hnr_db=base.hnr_db + rng.normal(0.0, 2.0),
                seed=int(rng.integers(0, 2 ** 31 - 1)),
            )
            rid = f"{label.lower()}{i:04d}"
            rec = synthesize(spec, id=rid, label=label, age=age, sex=sex)
            members.append(CohortMember(rec, spec, {"age": age, "sex": sex}))
    return members

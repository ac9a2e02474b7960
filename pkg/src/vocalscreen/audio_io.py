"""Loading, resampling, trimming and duration gating of phonation recordings."""
from __future__ import annotations

import csv
import math
import wave
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import firwin, resample_poly

from .errors import (
    EmptyAfterTrimError,
    FormatError,
    InputError,
    UnsupportedChannelError,
    UnsupportedCodecError,
)

TARGET_RATE = 8000
LABELS = ("PD", "HC", "Unknown")
SEXES = ("F", "M", "Unknown")


@dataclass
class Recording:
    id: str
    samples: np.ndarray
    sample_rate: int
    label: str = "Unknown"
    age: Optional[float] = None
    sex: str = "Unknown"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InputError(f"{self.id}: samples must be one-dimensional")
        if int(self.sample_rate) <= 0:
            raise InputError(f"{self.id}: sample rate must be positive")
        self.sample_rate = int(self.sample_rate)
        if not np.all(np.isfinite(self.samples)):
            raise InputError(f"{self.id}: non-finite samples")
        if self.label not in LABELS:
            raise InputError(f"{self.id}: label must be one of {LABELS}, got {self.label!r}")
        if self.sex not in SEXES:
            raise InputError(f"{self.id}: sex must be one of {SEXES}, got {self.sex!r}")
        if self.age is not None and not self.age > 0:
            raise InputError(f"{self.id}: age must be positive")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class GateDecision:
    accepted: bool
    duration: float
    reason: str


@dataclass(frozen=True)
class MetadataRow:
    id: str
    path: str
    label: str
    age: Optional[float]
    sex: str


def load_wav(path, id=None, label="Unknown", age=None, sex="Unknown") -> Recording:
    """Read a mono 16-bit PCM WAV file, scaled to [-1, 1) by 1/32768."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            comptype = wf.getcomptype()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg:
            raise UnsupportedCodecError(f"{path}: {msg}") from exc
        raise FormatError(f"{path}: {msg}") from exc
    except (EOFError, OSError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise FormatError(f"{path}: {exc}") from exc
    if comptype != "NONE":
        raise UnsupportedCodecError(f"{path}: compressed WAV ({comptype}) not supported")
    if width != 2:
        raise UnsupportedCodecError(f"{path}: only 16-bit PCM supported, got {8 * width}-bit")
    if n_channels != 1:
        raise UnsupportedChannelError(f"{path}: expected mono, got {n_channels} channels")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Recording(id or path.stem, data, rate, label=label, age=age, sex=sex)


def save_wav(rec: Recording, path) -> None:
    """Write as mono 16-bit PCM; values are rounded and clipped to int16."""
    ints = np.clip(np.round(rec.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(rec.sample_rate)
        wf.writeframes(ints.tobytes())


def resample(rec: Recording, rate: int = TARGET_RATE, taps_per_phase: int = 64) -> Recording:
    """Polyphase windowed-sinc resampling; a no-op when the rate already matches."""
    if rec.sample_rate == rate:
        return rec
    ratio = Fraction(rate, rec.sample_rate)
    up, down = ratio.numerator, ratio.denominator
    n_taps = taps_per_phase * max(up, down)
    fir = firwin(n_taps, 1.0 / max(up, down), window="hamming") * up
    y = resample_poly(rec.samples, up, down, window=fir)
    return replace(rec, samples=y, sample_rate=rate)


def frame_rms(x: np.ndarray, win: int) -> np.ndarray:
    n_frames = math.ceil(len(x) / win)
    padded = np.zeros(n_frames * win)
    padded[: len(x)] = x
    frames = padded.reshape(n_frames, win)
    counts = np.full(n_frames, win, dtype=float)
    counts[-1] = len(x) - (n_frames - 1) * win
    return np.sqrt((frames ** 2).sum(axis=1) / counts)


def trim_phonation(rec: Recording, threshold: float = 0.05, window: float = 0.025) -> Recording:
    """Strip leading and trailing 25 ms blocks whose RMS is below
    ``threshold`` times the loudest block; the interior is left untouched."""
    if len(rec.samples) == 0:
        raise EmptyAfterTrimError(f"{rec.id}: empty recording")
    win = max(1, int(round(window * rec.sample_rate)))
    rms = frame_rms(rec.samples, win)
    peak = rms.max()
    if peak <= 0:
        raise EmptyAfterTrimError(f"{rec.id}: recording is silent")
    loud = np.flatnonzero(rms >= threshold * peak)
    start = loud[0] * win
    stop = min(len(rec.samples), (loud[-1] + 1) * win)
    if start == 0 and stop == len(rec.samples):
        return rec
    return replace(rec, samples=rec.samples[start:stop].copy())


def gate_recording(rec: Recording, min_duration: float = 2.0, **trim_kwargs) -> GateDecision:
    """Accept unless the trimmed phonation is shorter than ``min_duration`` seconds."""
    if min_duration <= 0:
        raise InputError("min_duration must be positive")
    try:
        duration = trim_phonation(rec, **trim_kwargs).duration
    except EmptyAfterTrimError:
        return GateDecision(False, 0.0, "silent recording")
    if duration < min_duration:
        return GateDecision(False, duration,
                            f"phonation {duration:.3f} s shorter than {min_duration:g} s")
    return GateDecision(True, duration, "ok")


def read_metadata(path) -> list[MetadataRow]:
    """Parse the ``id,path,label,age,sex`` sidecar; relative paths resolve
    against the CSV's directory."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        missing = {"id", "path", "label", "age", "sex"} - set(reader.fieldnames or [])
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        for line in reader:
            label = line["label"].strip()
            if label not in ("PD", "HC"):
                raise InputError(f"{path}: row {line['id']}: label must be PD or HC")
            age_txt = (line["age"] or "").strip()
            sex = (line["sex"] or "").strip() or "Unknown"
            if sex not in SEXES:
                raise InputError(f"{path}: row {line['id']}: sex must be F, M or empty")
            wav = Path(line["path"].strip())
            if not wav.is_absolute():
                wav = path.parent / wav
            rows.append(MetadataRow(line["id"].strip(), str(wav), label,
                                    float(age_txt) if age_txt else None, sex))
    ids = [r.id for r in rows]
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: duplicate recording ids")
    return rows


def write_metadata(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "path", "label", "age", "sex"])
        for r in rows:
            age = "" if r.age is None else f"{int(round(r.age))}"
            sex = "" if r.sex == "Unknown" else r.sex
            w.writerow([r.id, r.path, r.label, age, sex])


def load_recording(row: MetadataRow) -> Recording:
    rec = load_wav(row.path, id=row.id, label=row.label, age=row.age, sex=row.sex)
    return resample(rec, TARGET_RATE)

import functools

import numpy as np
import pytest

from vocalscreen.audio_io import Recording
from vocalscreen.synthvoice import SynthSpec, synthesize

FS = 8000

# one line per acceptance criterion, printed again in the terminal summary
ACCEPTANCE_LINES = {}


def record_acceptance(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


def tone(freq, duration=3.0, fs=FS, amp=0.5, phase=0.0):
    t = np.arange(int(round(duration * fs))) / fs
    return amp * np.sin(2 * np.pi * freq * t + phase)


def sawtooth(freq, duration=3.0, fs=FS, amp=0.5):
    """Band-limited sawtooth: harmonics up to 0.45 fs with 1/k amplitudes."""
    t = np.arange(int(round(duration * fs))) / fs
    x = np.zeros_like(t)
    k = 1
    while k * freq < 0.45 * fs:
        x += np.sin(2 * np.pi * k * freq * t) / k
        k += 1
    return amp * x / np.max(np.abs(x))


def as_rec(x, id="x", fs=FS, **kw):
    return Recording(id, np.asarray(x, dtype=float), fs, **kw)


@functools.lru_cache(maxsize=None)
def synth_cached(**kw):
    return synthesize(SynthSpec(**kw))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

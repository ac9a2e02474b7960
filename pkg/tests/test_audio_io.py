import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import as_rec, tone
from vocalscreen.audio_io import (MetadataRow, Recording, gate_recording, load_recording,
                                  load_wav, read_metadata, resample, save_wav,
                                  trim_phonation, write_metadata)
from vocalscreen.errors import (EmptyAfterTrimError, FormatError, InputError,
                                UnsupportedChannelError, UnsupportedCodecError)
from vocalscreen.pitch import estimate_f0


def _write_pcm(path, ints, rate=8000, channels=1, width=2):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(width)
        wf.setframerate(rate)
        wf.writeframes(np.asarray(ints).astype(f"<i{width}").tobytes())


def test_silence_decodes_to_zeros(tmp_path):
    p = tmp_path / "s.wav"
    _write_pcm(p, np.zeros(8000, dtype=np.int16))
    rec = load_wav(p)
    assert rec.sample_rate == 8000
    assert len(rec.samples) == 8000 and not rec.samples.any()
    assert rec.id == "s"


def test_full_scale_normalization(tmp_path):
    p = tmp_path / "f.wav"
    _write_pcm(p, [32767, -32768, 0])
    rec = load_wav(p)
    assert rec.samples[0] == 32767 / 32768
    assert rec.samples[1] == -1.0


def test_stereo_rejected(tmp_path):
    p = tmp_path / "st.wav"
    _write_pcm(p, np.zeros(200, dtype=np.int16), channels=2)
    with pytest.raises(UnsupportedChannelError):
        load_wav(p)


def test_8bit_rejected(tmp_path):
    p = tmp_path / "b.wav"
    with wave.open(str(p), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(1)
        wf.setframerate(8000)
        wf.writeframes(bytes(100))
    with pytest.raises(UnsupportedCodecError):
        load_wav(p)


def test_float_codec_rejected(tmp_path):
    data = np.zeros(10, dtype="<f4").tobytes()
    fmt = struct.pack("<HHIIHH", 3, 1, 8000, 32000, 4, 32)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(data)) + data
    p = tmp_path / "fl.wav"
    p.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    with pytest.raises(UnsupportedCodecError):
        load_wav(p)


def test_malformed_header(tmp_path):
    p = tmp_path / "bad.wav"
    p.write_bytes(b"RIFX0000garbage")
    with pytest.raises(FormatError):
        load_wav(p)


def test_recording_validation():
    with pytest.raises(InputError):
        Recording("a", [0.0, np.nan], 8000)
    with pytest.raises(InputError):
        Recording("a", [0.0], 8000, label="XX")
    with pytest.raises(InputError):
        Recording("a", [0.0], 0)


# -- gating and trimming -----------------------------------------------------------

@pytest.mark.parametrize("seconds,accepted", [(1.9, False), (2.5, True), (2.0, True)])
def test_gate_threshold(seconds, accepted):
    d = gate_recording(as_rec(tone(200, seconds)))
    assert d.accepted is accepted
    assert d.duration == pytest.approx(seconds, abs=1e-9)


def test_gate_counts_voiced_duration_only():
    x = np.concatenate([np.zeros(8000), tone(150, 1.9), np.zeros(8000)])
    d = gate_recording(as_rec(x))
    assert not d.accepted and d.duration == pytest.approx(1.9, abs=0.03)


def test_gate_is_total_on_silence():
    d = gate_recording(as_rec(np.zeros(800)))
    assert not d.accepted


def test_trim_silence_padding():
    x = np.concatenate([np.zeros(4000), tone(150, 3.0), np.zeros(4000)])
    t = trim_phonation(as_rec(x))
    assert abs(t.duration - 3.0) <= 0.025
    # what remains is the tone: its RMS profile is flat
    blocks = t.samples[: len(t.samples) // 200 * 200].reshape(-1, 200)
    rms = np.sqrt((blocks ** 2).mean(axis=1))
    assert rms.min() > 0.9 * rms.max()


def test_trim_pure_tone_unchanged():
    rec = as_rec(tone(150, 2.0))
    assert np.array_equal(trim_phonation(rec).samples, rec.samples)


def test_trim_all_zero():
    with pytest.raises(EmptyAfterTrimError):
        trim_phonation(as_rec(np.zeros(1000)))


def test_trim_keeps_interior_silence():
    x = np.concatenate([tone(150, 1.0), np.zeros(4000), tone(150, 1.0)])
    assert len(trim_phonation(as_rec(x)).samples) == len(x)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=3000),
       st.integers(0, 3000), st.integers(0, 3000))
def test_trim_idempotent_and_shrinking(core, lead, tail):
    x = np.concatenate([np.zeros(lead), core, np.zeros(tail)])
    rec = as_rec(x)
    try:
        once = trim_phonation(rec)
    except EmptyAfterTrimError:
        assert not np.any(x)
        return
    twice = trim_phonation(once)
    assert len(once.samples) <= len(x)
    assert np.array_equal(once.samples, twice.samples)
    assert gate_recording(rec) == gate_recording(rec)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-32768, 32767), min_size=1, max_size=2000),
       st.sampled_from([8000, 16000, 44100]))
def test_wav_roundtrip_lossless(ints, rate):
    import tempfile
    rec = Recording("r", np.array(ints) / 32768.0, rate)
    with tempfile.TemporaryDirectory() as d:
        path = f"{d}/r.wav"
        save_wav(rec, path)
        back = load_wav(path)
    assert back.sample_rate == rate
    assert np.array_equal(back.samples, rec.samples)


# -- resampling and metadata ---------------------------------------------------------

def test_resample_to_8k_keeps_pitch():
    rec = as_rec(tone(220, 2.5, fs=16000), fs=16000)
    r8 = resample(rec)
    assert r8.sample_rate == 8000 and len(r8.samples) == 20000
    f0 = estimate_f0(r8).voiced_f0()
    assert abs(np.median(f0) - 220) < 1.0


def test_resample_noop_at_target():
    rec = as_rec(tone(220, 0.5))
    assert resample(rec) is rec


def test_metadata_roundtrip_and_relative_paths(tmp_path):
    sub = tmp_path / "wavs"
    sub.mkdir()
    rec = as_rec(tone(150, 2.2, fs=16000), id="p1_a", fs=16000)
    save_wav(rec, sub / "a.wav")
    rows = [MetadataRow("p1_a", "wavs/a.wav", "PD", 61.0, "F"),
            MetadataRow("p2_a", "wavs/b.wav", "HC", None, "Unknown")]
    write_metadata(rows, tmp_path / "meta.csv")
    back = read_metadata(tmp_path / "meta.csv")
    assert [r.id for r in back] == ["p1_a", "p2_a"]
    assert back[0].path == str(tmp_path / "wavs/a.wav")
    assert back[0].age == 61.0 and back[1].age is None and back[1].sex == "Unknown"
    loaded = load_recording(back[0])
    assert loaded.sample_rate == 8000 and loaded.label == "PD" and loaded.sex == "F"


@pytest.mark.parametrize("body", [
    "id,path,label,age,sex\na,a.wav,XX,50,F\n",
    "id,path,label,age,sex\na,a.wav,PD,50,Q\n",
    "id,path,label,age,sex\na,a.wav,PD,50,F\na,b.wav,HC,40,M\n",
    "id,path,label\na,a.wav,PD\n",
])
def test_metadata_errors(tmp_path, body):
    p = tmp_path / "m.csv"
    p.write_text(body)
    with pytest.raises(InputError):
        read_metadata(p)

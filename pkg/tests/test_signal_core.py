"""Framing, overlap-add, WAV round-trips, SNR mixing, and activity gating."""

import numpy as np
import pytest

from hdag.errors import DegenerateInputError
from hdag.signal_core import (AudioSignal, MixSpec, activity_mask, frame_len_for,
                              frame_signal, mix_at_snr, overlap_add, read_wav,
                              resample, write_wav)

FS = 16000


def _tone(freq_hz, n, fs=FS, amp=0.5):
    return amp * np.sin(2.0 * np.pi * freq_hz * np.arange(n) / fs)


def test_frame_len_for():
    assert frame_len_for(16000, 32.0) == 512
    assert frame_len_for(8000, 32.0) == 256
    assert frame_len_for(16000, 16.0) == 256


def test_wav_full_scale_and_zero(tmp_path):
    samples = np.array([32767.0 / 32768.0, 0.0, -1.0, 0.25])
    path = tmp_path / "scale.wav"
    write_wav(path, AudioSignal(samples, FS))
    back = read_wav(path)
    assert back.sample_rate_hz == FS
    assert abs(back.samples[0] - 32767.0 / 32768.0) < 1e-12
    assert back.samples[1] == 0.0
    assert back.samples[2] == -1.0


def test_wav_round_trip_quantization(tmp_path):
    rng = np.random.default_rng(42)
    signals = [_tone(1000.0, 2048)] + [
        rng.uniform(-1.0, 1.0, rng.integers(100, 4000)) for _ in range(10)
    ]
    for i, samples in enumerate(signals):
        path = tmp_path / f"rt_{i}.wav"
        write_wav(path, AudioSignal(samples, FS))
        back = read_wav(path)
        assert back.sample_rate_hz == FS
        assert back.samples.size == samples.size
        dev = np.max(np.abs(back.samples - samples))
        assert dev <= 1.0 / 32768.0, f"signal {i}: quantization deviation {dev}"


def test_read_missing_file_raises(tmp_path):
    with pytest.raises(OSError):
        read_wav(tmp_path / "nope.wav")


def test_frame_counts_enumerated():
    seq = frame_signal(AudioSignal(np.ones(1024), FS))
    assert seq.frame_len == 512
    assert seq.hop == 256
    assert seq.n_frames == 3
    assert [seq.frame_start(k) for k in range(3)] == [0, 256, 512]

    single = frame_signal(AudioSignal(np.ones(512), FS))
    assert single.n_frames == 1


def test_frame_count_formula_and_padding():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(512, 6000))
        x = rng.standard_normal(n)
        seq = frame_signal(AudioSignal(x, FS))
        expected = int(np.ceil((n - 512) / 256)) + 1
        assert seq.n_frames == expected, f"n={n}"
        assert seq.frames.shape == (expected, 512)
        # tail beyond the source is zero padding
        last = seq.frames[-1]
        start = seq.frame_start(seq.n_frames - 1)
        valid = n - start
        assert np.array_equal(last[:valid], x[start:])
        assert not np.any(last[valid:])


def test_frame_too_short_raises():
    with pytest.raises(DegenerateInputError):
        frame_signal(AudioSignal(np.ones(511), FS))


def test_overlap_add_identity():
    rng = np.random.default_rng(11)
    for n in (512, 768, 1024, 1500, 4096, 5001):
        x = rng.standard_normal(n)
        seq = frame_signal(AudioSignal(x, FS))
        back = overlap_add(seq)
        assert back.samples.size == n
        err = np.sqrt(np.mean((back.samples - x) ** 2) / np.mean(x ** 2))
        assert err <= 1e-10, f"n={n}: relative RMS {err}"


def test_overlap_add_zero_frames():
    seq = frame_signal(AudioSignal(np.zeros(1024), FS))
    back = overlap_add(seq)
    assert not np.any(back.samples)


def test_overlap_add_single_frame():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(512)
    back = overlap_add(frame_signal(AudioSignal(x, FS)))
    err = np.sqrt(np.mean((back.samples - x) ** 2) / np.mean(x ** 2))
    assert err <= 1e-10


def test_mix_equal_power_zero_db():
    rng = np.random.default_rng(5)
    speech = rng.standard_normal(4000)
    noise = rng.standard_normal(4000)
    noise *= np.sqrt(np.mean(speech ** 2) / np.mean(noise ** 2))
    out = mix_at_snr(AudioSignal(speech, FS), AudioSignal(noise, FS), MixSpec(0.0))
    assert np.allclose(out.samples, speech + noise, atol=1e-12)


def test_mix_minus_ten_db_scales_noise_sqrt_ten():
    rng = np.random.default_rng(6)
    speech = rng.standard_normal(4000)
    speech /= np.sqrt(np.mean(speech ** 2))
    noise = rng.standard_normal(4000)
    noise /= np.sqrt(np.mean(noise ** 2))
    out = mix_at_snr(AudioSignal(speech, FS), AudioSignal(noise, FS), MixSpec(-10.0))
    added = out.samples - speech
    assert np.allclose(added, np.sqrt(10.0) * noise, rtol=1e-9)


def test_mix_huge_snr_is_speech():
    rng = np.random.default_rng(8)
    speech = rng.standard_normal(2000)
    noise = rng.standard_normal(2000)
    out = mix_at_snr(AudioSignal(speech, FS), AudioSignal(noise, FS), MixSpec(120.0))
    assert np.max(np.abs(out.samples - speech)) < 1e-4


def test_mix_achieves_requested_snr():
    rng = np.random.default_rng(9)
    for trial in range(15):
        speech = rng.standard_normal(3000) * rng.uniform(0.1, 2.0)
        noise = rng.standard_normal(3000) * rng.uniform(0.1, 2.0)
        snr = float(rng.uniform(-15.0, 15.0))
        out = mix_at_snr(AudioSignal(speech, FS), AudioSignal(noise, FS), MixSpec(snr))
        added = out.samples - speech
        got = 10.0 * np.log10(np.mean(speech ** 2) / np.mean(added ** 2))
        assert abs(got - snr) <= 0.01, f"trial {trial}: {got} vs {snr}"
        # speech component enters unscaled
        assert np.allclose(out.samples - added, speech)


def test_mix_degenerate_inputs_raise():
    rng = np.random.default_rng(10)
    live = AudioSignal(rng.standard_normal(1000), FS)
    dead = AudioSignal(np.zeros(1000), FS)
    with pytest.raises(DegenerateInputError):
        mix_at_snr(dead, live, MixSpec(0.0))
    with pytest.raises(DegenerateInputError):
        mix_at_snr(live, dead, MixSpec(0.0))


def test_mix_tiles_short_noise():
    rng = np.random.default_rng(12)
    speech = rng.standard_normal(1000)
    noise = rng.standard_normal(300)
    out = mix_at_snr(AudioSignal(speech, FS), AudioSignal(noise, FS), MixSpec(0.0))
    added = out.samples - speech
    # tiled copies are identical up to the single global gain
    assert np.allclose(added[:300] / noise, added[300:600] / noise)


def test_mix_crops_long_noise():
    rng = np.random.default_rng(13)
    speech = rng.standard_normal(500)
    noise = rng.standard_normal(2000)
    out = mix_at_snr(AudioSignal(speech, FS), AudioSignal(noise, FS), MixSpec(0.0))
    added = out.samples - speech
    ratio = added / noise[:500]
    assert np.allclose(ratio, ratio[0])


def test_resample_halves_length_and_keeps_tone():
    x = _tone(440.0, 8000)
    down = resample(AudioSignal(x, 16000), 8000)
    assert down.sample_rate_hz == 8000
    assert down.samples.size == 4000
    spectrum = np.abs(np.fft.rfft(down.samples))
    peak_hz = np.argmax(spectrum) * 8000 / down.samples.size
    assert abs(peak_hz - 440.0) < 4.0


def test_resample_identity_rate():
    x = _tone(300.0, 1000)
    same = resample(AudioSignal(x, FS), FS)
    assert np.array_equal(same.samples, x)


def test_activity_mask_flags_loud_frames():
    quiet = np.zeros(2048)
    loud = _tone(200.0, 2048, amp=0.8)
    sig = AudioSignal(np.concatenate([loud, quiet]), FS)
    mask = activity_mask(sig)
    n = mask.size
    assert mask[: n // 3].all()
    assert not mask[-n // 3:].any()

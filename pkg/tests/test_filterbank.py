"""Gammachirp design, recursive band splitting, gains, and enhancement paths."""

import numpy as np
import pytest

from hdag import filterbank as fb
from hdag import synth
from hdag.pitch import FrameClass
from hdag.signal_core import AudioSignal

FS = 16000


def test_third_octave_center_examples():
    centers = fb.third_octave_centers(100.0, 10)
    assert centers[0] == 100.0
    assert centers[3] == 200.0
    assert fb.third_octave_centers(125.0, 10)[9] == 1000.0


def test_third_octave_doubling_exact():
    rng = np.random.default_rng(61)
    for _ in range(100):
        anchor = float(rng.uniform(60.0, 700.0))
        centers = fb.third_octave_centers(anchor, 12)
        assert np.array_equal(centers[3:], 2.0 * centers[:-3])
        assert np.all(np.diff(centers) > 0.0)


def test_harmonic_centers():
    assert np.array_equal(fb.harmonic_centers(150.0, 4),
                          np.array([150.0, 300.0, 450.0, 600.0]))


def test_default_gains_tables():
    low = fb.default_gains(FrameClass.LOW_PITCH)
    high = fb.default_gains(FrameClass.HIGH_PITCH)
    assert np.array_equal(low, [14.0, 1.0, 4.0, 8.0, 4.0, 3.5, 3.0, 2.0, 2.0, 1.5])
    assert np.array_equal(high, [14.0, 1.0, 1.0, 4.5, 2.0, 3.5, 2.5, 2.0, 1.5, 1.5])
    assert low[0] == high[0] == 14.0
    assert high[3] == 4.5 and high[9] == 1.5
    with pytest.raises(ValueError):
        fb.default_gains(FrameClass.UNVOICED)


def test_gtf_baseline_config():
    cfg = fb.gtf_f0_config()
    assert cfg.spacing == "harmonic"
    assert cfg.num_filters == 4
    assert cfg.bandwidth_factor == 0.25
    assert cfg.asymmetry == 0.0
    assert cfg.gains_low == (5.0, 5.0, 4.0, 2.5)
    assert cfg.gains_high == (5.0, 5.0, 4.0, 2.5)


def test_config_validation():
    with pytest.raises(ValueError):
        fb.FilterbankConfig(spacing="linear")
    with pytest.raises(ValueError):
        fb.FilterbankConfig(num_filters=3)  # gain tables keep length 10
    with pytest.raises(ValueError):
        fb.FilterbankConfig(bandwidth_factor=0.0)


def test_envelope_peak_delay():
    spec = fb.GammachirpSpec(f_c_hz=300.0, bandwidth_hz=30.0, order=4)
    assert spec.peak_delay_s == pytest.approx(3.0 / (2.0 * np.pi * 30.0))
    assert spec.peak_delay_s == pytest.approx(0.01592, abs=5e-5)


def test_kernel_envelope_peaks_at_index():
    kernel = fb.design_gammachirp(
        fb.GammachirpSpec(f_c_hz=400.0, bandwidth_hz=100.0, asymmetry=0.0), FS)
    assert int(np.argmax(np.abs(kernel.taps))) == kernel.peak_index
    # attack length matches the analytic peak delay
    assert kernel.peak_index == int(np.floor(kernel.spec.peak_delay_s * FS))


def test_zero_chirp_equals_gammatone_sample_exact():
    rng = np.random.default_rng(62)
    for _ in range(8):
        f_c = float(rng.uniform(80.0, 3000.0))
        b = 0.25 * f_c
        order = int(rng.choice([3, 4, 5]))
        spec = fb.GammachirpSpec(f_c_hz=f_c, bandwidth_hz=b, order=order,
                                 asymmetry=0.0)
        kernel = fb.design_gammachirp(spec, FS)
        # independent gammatone on the same grid
        t_c = (order - 1) / (2.0 * np.pi * b)
        pre = int(np.floor(t_c * FS))
        t = np.arange(-pre, kernel.taps.size - pre) / FS
        u = t + t_c
        u_pos = np.where(u > 0.0, u, 1.0)
        gamma = np.where(u > 0.0,
                         u_pos ** (order - 1)
                         * np.exp(-2.0 * np.pi * b * u_pos)
                         * np.cos(2.0 * np.pi * f_c * t),
                         0.0)
        nfft = 1 << int(np.ceil(np.log2(max(16384, 4 * gamma.size))))
        gamma = gamma / np.abs(np.fft.rfft(gamma, nfft)).max()
        assert np.array_equal(kernel.taps, gamma), f"f_c={f_c}, n={order}"


def test_peak_frequency_tracks_center_and_chirp_sign():
    spec0 = fb.GammachirpSpec(f_c_hz=500.0, bandwidth_hz=125.0, asymmetry=0.0)
    peak0 = fb.kernel_peak_frequency(fb.design_gammachirp(spec0, FS))
    assert abs(peak0 - 500.0) <= 0.05 * 500.0
    for c in (-2.0, -1.0, 1.0, 2.0):
        spec = fb.GammachirpSpec(f_c_hz=500.0, bandwidth_hz=125.0, asymmetry=c)
        peak = fb.kernel_peak_frequency(fb.design_gammachirp(spec, FS))
        assert np.sign(peak - 500.0) == np.sign(c), f"c={c}: peak {peak}"


def test_design_rejects_center_at_nyquist():
    with pytest.raises(ValueError):
        fb.design_gammachirp(fb.GammachirpSpec(f_c_hz=8000.0, bandwidth_hz=100.0), FS)


def test_unit_peak_magnitude_response():
    rng = np.random.default_rng(63)
    for _ in range(5):
        f_c = float(rng.uniform(100.0, 2000.0))
        kernel = fb.design_gammachirp(
            fb.GammachirpSpec(f_c_hz=f_c, bandwidth_hz=0.15 * f_c), FS)
        nfft = 1 << int(np.ceil(np.log2(max(16384, 4 * kernel.taps.size))))
        mag = np.abs(np.fft.rfft(kernel.taps, nfft))
        assert mag.max() == pytest.approx(1.0, abs=1e-9)
        # a finer grid may only graze marginally above the sampled peak
        fine = np.abs(np.fft.rfft(kernel.taps, 4 * nfft))
        assert fine.max() == pytest.approx(1.0, abs=1e-3)


def test_empty_bank_returns_frame_as_residual():
    rng = np.random.default_rng(64)
    x = rng.standard_normal(512)
    out = fb.recursive_filter(x, [])
    assert out.bands.shape == (0, 512)
    assert np.array_equal(out.residual, x)


def test_recursive_filter_completeness():
    rng = np.random.default_rng(65)
    cfg = fb.FilterbankConfig()
    for trial in range(25):
        anchor = float(rng.uniform(80.0, 500.0))
        kernels, _ = fb.build_bank(cfg, anchor, FS, max_tail=512)
        x = rng.standard_normal(512) * rng.uniform(0.1, 3.0)
        out = fb.recursive_filter(x, kernels)
        err = np.max(np.abs(out.bands.sum(axis=0) + out.residual - x))
        assert err <= 1e-9 * np.max(np.abs(x)), f"trial {trial}: {err}"


def test_tone_at_first_center_lands_in_band_zero():
    # symmetric narrowband bank: response peak sits on the center
    cfg = fb.FilterbankConfig(asymmetry=0.0)
    kernels, _ = fb.build_bank(cfg, 250.0, FS)
    t = np.arange(4096) / FS
    frame = np.cos(2.0 * np.pi * 250.0 * t)
    out = fb.recursive_filter(frame, kernels)
    fraction = np.sum(out.bands[0] ** 2) / np.sum(frame ** 2)
    assert fraction >= 0.8, f"band 0 captured only {fraction:.3f} of the energy"


def test_unit_gains_reconstruct_identity():
    rng = np.random.default_rng(66)
    cfg = fb.FilterbankConfig()
    kernels, _ = fb.build_bank(cfg, 180.0, FS, max_tail=512)
    x = rng.standard_normal(512)
    out = fb.recursive_filter(x, kernels)
    back = fb.reconstruct_frame(out, np.ones(len(kernels)))
    assert np.max(np.abs(back - x)) <= 1e-9


def test_doubled_band_gain_energy_bookkeeping():
    rng = np.random.default_rng(67)
    cfg = fb.FilterbankConfig()
    kernels, _ = fb.build_bank(cfg, 200.0, FS, max_tail=512)
    x = rng.standard_normal(512)
    out = fb.recursive_filter(x, kernels)
    gains = np.ones(len(kernels))
    gains[0] = 2.0
    boosted = fb.reconstruct_frame(out, gains)
    unit = fb.reconstruct_frame(out, np.ones(len(kernels)))
    addition = boosted - unit
    assert np.allclose(addition, out.bands[0], atol=1e-12)
    scaled_energy = np.sum((2.0 * out.bands[0]) ** 2)
    assert scaled_energy == pytest.approx(4.0 * np.sum(out.bands[0] ** 2))


def test_zero_frame_stays_zero():
    cfg = fb.FilterbankConfig()
    kernels, _ = fb.build_bank(cfg, 150.0, FS, max_tail=512)
    out = fb.recursive_filter(np.zeros(512), kernels)
    assert not np.any(out.bands)
    assert not np.any(out.residual)
    assert not np.any(fb.reconstruct_frame(out, fb.default_gains(FrameClass.LOW_PITCH)))


def test_build_bank_drops_centers_near_nyquist():
    cfg = fb.FilterbankConfig()
    kernels, dropped = fb.build_bank(cfg, 1000.0, FS)
    centers = fb.third_octave_centers(1000.0, cfg.num_filters)
    expected_kept = int(np.sum(centers < 0.45 * FS))
    assert len(kernels) == expected_kept
    assert dropped == cfg.num_filters - expected_kept
    assert dropped >= 1
    # a low anchor keeps the full bank
    full, none_dropped = fb.build_bank(cfg, 150.0, FS, max_tail=512)
    assert len(full) == cfg.num_filters and none_dropped == 0


def test_enhance_all_unvoiced_passes_through():
    rng = np.random.default_rng(68)
    sig = AudioSignal(0.1 * rng.standard_normal(2048), FS)
    out, report = fb.enhance_signal(sig, fb.FilterbankConfig(),
                                    voiced_mask=np.zeros(7, dtype=bool),
                                    ensemble_size=3, seed=0)
    assert report.n_voiced == 0
    err = np.sqrt(np.mean((out.samples - sig.samples) ** 2)
                  / np.mean(sig.samples ** 2))
    assert err <= 1e-10


def test_enhance_unity_gains_identity():
    cfg = fb.FilterbankConfig(gains_low=(1.0,) * 10, gains_high=(1.0,) * 10)
    vow, _ = synth.synth_vowel(150.0, 0.35, harmonics=5, rolloff=0.0, gaps=0)
    out, report = fb.enhance_signal(vow, cfg, ensemble_size=5, seed=0,
                                    normalize=False)
    assert report.n_voiced > 0
    err = np.sqrt(np.mean((out.samples - vow.samples) ** 2)
                  / np.mean(vow.samples ** 2))
    assert err <= 1e-6


def test_enhance_output_is_finite_and_bounded():
    vow, labels = synth.synth_vowel(220.0, 0.4, harmonics=6, rolloff=0.3, seed=2)
    out, report = fb.enhance_signal(vow, fb.FilterbankConfig(),
                                    voiced_mask=labels.voiced,
                                    ensemble_size=5, seed=0)
    assert np.all(np.isfinite(out.samples))
    assert np.max(np.abs(out.samples)) <= 1.0
    assert report.n_voiced > 0
    # voiced frames carry their applied gain vectors in the report
    voiced_frames = [f for f in report.frames if f.voiced]
    assert voiced_frames
    assert all(len(f.gains) == f.n_filters for f in voiced_frames)

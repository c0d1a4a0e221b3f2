"""Deterministic test-signal synthesis: voiced harmonic complexes with
frame labels, white noise, and speech-shaped noise.

Everything here is a pure function of its arguments including the
seed, so repeated runs produce byte-identical WAV files.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve, firwin2, welch

from .errors import UsageError
from .signal_core import AudioSignal, frame_signal

SYNTH_F0_MIN_HZ = 50.0
SYNTH_F0_MAX_HZ = 400.0
RAMP_MS = 10.0
NOISE_RMS = 0.15


@dataclass
class FrameLabels:
    """Per-frame voicing flags and reference F0 (0 where unvoiced)."""

    voiced: np.ndarray
    f0_hz: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.voiced.size


def write_labels(path, labels: FrameLabels) -> None:
    """Text sidecar: one 'index flag f0' line per frame, flag v or u."""
    with open(path, "w") as fh:
        fh.write("# frame_index v/uv f0_hz\n")
        for i in range(labels.n_frames):
            flag = "v" if labels.voiced[i] else "u"
            fh.write(f"{i} {flag} {labels.f0_hz[i]:.4f}\n")


def read_labels(path) -> FrameLabels:
    voiced = []
    f0 = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or parts[1] not in ("v", "u"):
                raise UsageError(f"{path}: bad label line {line!r}")
            voiced.append(parts[1] == "v")
            f0.append(float(parts[2]))
    return FrameLabels(voiced=np.array(voiced, dtype=bool),
                       f0_hz=np.array(f0, dtype=np.float64))


def _voiced_gate(n: int, sample_rate_hz: int, gaps: int, gap_ms: float):
    """Amplitude gate with evenly spaced unvoiced gaps and raised-cosine
    ramps, plus the boolean voiced region it encodes."""
    gate = np.ones(n)
    voiced = np.ones(n, dtype=bool)
    gap_len = int(round(gap_ms * sample_rate_hz / 1000.0))
    if gaps > 0 and gap_len > 0:
        if gaps * gap_len >= n:
            raise UsageError("gaps do not fit in the requested duration")
        for g in range(gaps):
            center = int(round((g + 1) * n / (gaps + 1)))
            lo = max(0, center - gap_len // 2)
            hi = min(n, lo + gap_len)
            gate[lo:hi] = 0.0
            voiced[lo:hi] = False
    ramp = int(round(RAMP_MS * sample_rate_hz / 1000.0))
    if ramp > 1:
        edges = np.flatnonzero(np.diff(voiced.astype(int)))
        shape = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        for e in edges:
            if voiced[e]:  # falling edge at e+1
                lo = max(0, e + 1 - ramp)
                gate[lo:e + 1] *= shape[::-1][:e + 1 - lo]
            else:  # rising edge at e+1
                hi = min(n, e + 1 + ramp)
                gate[e + 1:hi] *= shape[:hi - e - 1]
    return gate, voiced


def synth_vowel(f0_hz: float, duration_s: float, sample_rate_hz: int = 16000,
                harmonics: int = 8, rolloff: float = 1.0,
                vibrato_rate_hz: float = 5.0, vibrato_depth: float = 0.0,
                glide: float = 0.0, gaps: int = 1, gap_ms: float = 120.0,
                phases: str = "aligned",
                seed: int = 0) -> tuple[AudioSignal, FrameLabels]:
    """Harmonic complex at f0 with optional vibrato, glide and gaps.

    Harmonic h has amplitude h^-rolloff; harmonics that would cross
    0.45 of the sample rate are dropped.  With phases="aligned" all
    harmonics start as cosines, giving the pulse-like waveform of a
    glottal excitation; phases="random" draws each initial phase from
    the seed.  glide is the total fractional F0 rise across the signal
    (e.g. 0.2 sweeps from 0.9*f0 to 1.1*f0).  Labels mark a frame
    voiced when more than half its samples fall in the voiced region,
    with the frame-center F0.
    """
    if phases not in ("aligned", "random"):
        raise UsageError(f"phases must be 'aligned' or 'random', got {phases!r}")
    if not SYNTH_F0_MIN_HZ <= f0_hz <= SYNTH_F0_MAX_HZ:
        raise UsageError(f"f0 must lie in [{SYNTH_F0_MIN_HZ:.0f}, "
                         f"{SYNTH_F0_MAX_HZ:.0f}] Hz, got {f0_hz}")
    if duration_s <= 0.0:
        raise UsageError(f"duration must be positive, got {duration_s}")
    if harmonics < 1:
        raise UsageError("need at least one harmonic")
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    f0_track = f0_hz * (1.0 + vibrato_depth * np.sin(2.0 * np.pi * vibrato_rate_hz * t)
                        + glide * (t / t[-1] - 0.5 if n > 1 else 0.0))
    phase_base = 2.0 * np.pi * np.cumsum(f0_track) / sample_rate_hz
    rng = np.random.default_rng(seed)
    f0_top = f0_track.max()
    x = np.zeros(n)
    for h in range(1, harmonics + 1):
        if h * f0_top >= 0.45 * sample_rate_hz:
            break
        phi = rng.uniform(0.0, 2.0 * np.pi) if phases == "random" else 0.0
        x += h ** (-rolloff) * np.cos(h * phase_base + phi)
    gate, voiced_region = _voiced_gate(n, sample_rate_hz, gaps, gap_ms)
    x *= gate
    peak = np.max(np.abs(x))
    if peak > 0.0:
        x *= 0.5 / peak
    sig = AudioSignal(x, sample_rate_hz)
    seq = frame_signal(sig)
    voiced = np.zeros(seq.n_frames, dtype=bool)
    f0_frames = np.zeros(seq.n_frames)
    for q in range(seq.n_frames):
        s = q * seq.hop
        span = voiced_region[s:min(s + seq.frame_len, n)]
        if span.size and span.mean() > 0.5:
            voiced[q] = True
            center = min(s + seq.frame_len // 2, n - 1)
            f0_frames[q] = f0_track[center]
    return sig, FrameLabels(voiced=voiced, f0_hz=f0_frames)


def white_noise(n_samples: int, sample_rate_hz: int = 16000, seed: int = 0) -> AudioSignal:
    """Gaussian white noise at a fixed RMS."""
    if n_samples < 1:
        raise UsageError("n_samples must be >= 1")
    x = np.random.default_rng((seed, 0)).standard_normal(n_samples)
    return AudioSignal(x * (NOISE_RMS / np.sqrt(np.mean(x ** 2))), sample_rate_hz)


@lru_cache(maxsize=4)
def _ssn_fir(sample_rate_hz: int) -> np.ndarray:
    """Linear-phase FIR whose magnitude follows the mean spectrum of a
    small built-in set of harmonic complexes."""
    psd_acc = None
    for i, f0 in enumerate((90.0, 120.0, 180.0, 250.0)):
        sig, _ = synth_vowel(f0, 1.0, sample_rate_hz, harmonics=12,
                             gaps=0, seed=1000 + i)
        freqs, psd = welch(sig.samples, fs=sample_rate_hz, nperseg=1024)
        psd_acc = psd if psd_acc is None else psd_acc + psd
    gain = np.sqrt(psd_acc / psd_acc.max())
    gain = np.maximum(gain, 1e-3)
    gain[0] = 0.0
    gain[-1] = 0.0
    return firwin2(513, freqs / (sample_rate_hz / 2.0), gain)


def speech_shaped_noise(n_samples: int, sample_rate_hz: int = 16000,
                        seed: int = 0) -> AudioSignal:
    """White noise shaped to the long-term spectrum of the built-in
    harmonic corpus, at the same fixed RMS as white_noise."""
    if n_samples < 1:
        raise UsageError("n_samples must be >= 1")
    fir = _ssn_fir(sample_rate_hz)
    margin = fir.size
    raw = np.random.default_rng((seed, 1)).standard_normal(n_samples + 2 * margin)
    shaped = fftconvolve(raw, fir, mode="same")[margin:margin + n_samples]
    return AudioSignal(shaped * (NOISE_RMS / np.sqrt(np.mean(shaped ** 2))),
                       sample_rate_hz)


def make_noise(kind: str, n_samples: int, sample_rate_hz: int = 16000,
               seed: int = 0) -> AudioSignal:
    """Dispatch on the builtin noise kinds "white" and "ssn"."""
    if kind == "white":
        return white_noise(n_samples, sample_rate_hz, seed)
    if kind == "ssn":
        return speech_shaped_noise(n_samples, sample_rate_hz, seed)
    raise UsageError(f"unknown noise kind {kind!r}")

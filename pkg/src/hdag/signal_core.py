"""Audio containers, WAV I/O, framing and overlap-add, SNR mixing.

All samples are float64 in [-1, 1].  Analysis frames are rectangular;
the synthesis window (periodic Hann) is applied exactly once, inside
:func:`overlap_add`, and compensated by the window overlap sum.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

from .errors import DegenerateInputError, FormatError

PCM_SCALE = 32768.0


@dataclass(frozen=True)
class AudioSignal:
    """Mono audio with its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if samples.size < 1:
            raise DegenerateInputError("empty signal")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class FrameSequence:
    """Rectangular analysis frames plus the bookkeeping needed to invert them.

    Attributes
    ----------
    frames : (n_frames, frame_len) array
    hop : int
        Frame advance in samples.
    source_len : int
        Length of the signal the frames were cut from; overlap_add
        restores exactly this many samples.
    window : str
        Synthesis window descriptor, only "hann" is implemented.
    voiced_mask : (n_frames,) bool array or None
        Optional per-frame voicing annotation filled in downstream.
    """

    frames: np.ndarray
    sample_rate_hz: int
    hop: int
    source_len: int
    window: str = "hann"
    voiced_mask: np.ndarray | None = field(default=None)

    @property
    def frame_len(self) -> int:
        return self.frames.shape[1]

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def frame_start(self, index: int) -> int:
        return index * self.hop

    def frame_times_s(self) -> np.ndarray:
        """Center time of each frame in seconds."""
        starts = np.arange(self.n_frames) * self.hop
        return (starts + self.frame_len / 2.0) / self.sample_rate_hz


@dataclass(frozen=True)
class MixSpec:
    """Target SNR and the power-measurement scope for mixing."""

    snr_db: float
    scope: str = "full"  # "full" or "speech-active"

    def __post_init__(self):
        if self.scope not in ("full", "speech-active"):
            raise ValueError(f"unknown mix scope {self.scope!r}")


def read_wav(path) -> AudioSignal:
    """Read a PCM WAV file as float64 in [-1, 1].

    16-bit PCM is the native format; 32-bit float and 32-bit PCM are
    accepted and rescaled.  Multichannel input is downmixed by
    averaging channels.
    """
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM_SCALE
    elif data.dtype == np.float32 or data.dtype == np.float64:
        samples = data.astype(np.float64)
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    else:
        raise FormatError(f"{path}: unsupported WAV sample format {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioSignal(samples, int(rate))


def write_wav(path, signal: AudioSignal) -> None:
    """Write 16-bit PCM.  Samples are clipped to [-1, 1] first."""
    clipped = np.clip(signal.samples, -1.0, 1.0)
    pcm = np.clip(np.round(clipped * PCM_SCALE), -PCM_SCALE, PCM_SCALE - 1).astype(np.int16)
    wavfile.write(path, signal.sample_rate_hz, pcm)


def frame_len_for(sample_rate_hz: int, frame_ms: float) -> int:
    return int(round(frame_ms * sample_rate_hz / 1000.0))


def frame_signal(signal: AudioSignal, frame_ms: float = 32.0,
                 overlap: float = 0.5) -> FrameSequence:
    """Cut a signal into rectangular frames with the given overlap.

    The last partial frame is zero-padded.  The frame count is
    ceil((len - frame_len) / hop) + 1; input shorter than one frame
    is rejected.
    """
    if frame_ms <= 0:
        raise ValueError(f"frame_ms must be positive, got {frame_ms}")
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    flen = frame_len_for(signal.sample_rate_hz, frame_ms)
    hop = int(round(flen * (1.0 - overlap)))
    if hop < 1:
        raise ValueError("hop rounds to zero; overlap too close to 1")
    n = len(signal)
    if n < flen:
        raise DegenerateInputError(
            f"signal of {n} samples is shorter than one {flen}-sample frame")
    if n == flen:
        count = 1
    else:
        count = int(np.ceil((n - flen) / hop)) + 1
    padded = np.zeros((count - 1) * hop + flen, dtype=np.float64)
    padded[:n] = signal.samples
    idx = np.arange(count)[:, None] * hop + np.arange(flen)[None, :]
    return FrameSequence(frames=padded[idx], sample_rate_hz=signal.sample_rate_hz,
                         hop=hop, source_len=n)


def _periodic_hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def overlap_add(seq: FrameSequence) -> AudioSignal:
    """Resynthesize a signal from (possibly modified) frames.

    Applies the periodic Hann window to every frame, accumulates, and
    divides by the window overlap sum.  Where the window sum vanishes
    (only the very first sample at 50% overlap) the unwindowed frame
    value is used instead, so unmodified frames reconstruct exactly.
    """
    if seq.window != "hann":
        raise ValueError(f"unsupported synthesis window {seq.window!r}")
    flen = seq.frame_len
    total = (seq.n_frames - 1) * seq.hop + flen
    win = _periodic_hann(flen)
    acc = np.zeros(total)
    wsum = np.zeros(total)
    raw = np.zeros(total)
    cover = np.zeros(total)
    for q in range(seq.n_frames):
        s = q * seq.hop
        frame = seq.frames[q]
        acc[s:s + flen] += frame * win
        wsum[s:s + flen] += win
        raw[s:s + flen] += frame
        cover[s:s + flen] += 1.0
    out = np.empty(total)
    good = wsum > 1e-12
    out[good] = acc[good] / wsum[good]
    out[~good] = raw[~good] / np.maximum(cover[~good], 1.0)
    return AudioSignal(out[:seq.source_len], seq.sample_rate_hz)


def _fit_noise_length(noise: np.ndarray, n: int) -> np.ndarray:
    """Tile with wraparound when short, crop from the start when long."""
    if noise.size >= n:
        return noise[:n]
    reps = int(np.ceil(n / noise.size))
    return np.tile(noise, reps)[:n]


def mix_at_snr(speech: AudioSignal, noise: AudioSignal, spec: MixSpec,
               active_mask: np.ndarray | None = None) -> AudioSignal:
    """Scale the noise and add it so the mixture hits spec.snr_db.

    The speech component is never scaled.  Under the "speech-active"
    scope powers are measured only on samples flagged by active_mask;
    when no mask is supplied one is derived from 32 ms frame energies
    above the peak frame minus 40 dB.
    """
    if speech.sample_rate_hz != noise.sample_rate_hz:
        raise ValueError("speech and noise sample rates differ")
    n = len(speech)
    noise_fit = _fit_noise_length(noise.samples, n)
    if spec.scope == "speech-active":
        if active_mask is None:
            active_mask = activity_mask(speech)
        active_mask = np.asarray(active_mask, dtype=bool)
        if active_mask.size != n:
            raise ValueError("active_mask length does not match speech")
        if not active_mask.any():
            raise DegenerateInputError("speech-active scope with empty mask")
        p_speech = np.mean(speech.samples[active_mask] ** 2)
        p_noise = np.mean(noise_fit[active_mask] ** 2)
    else:
        p_speech = np.mean(speech.samples ** 2)
        p_noise = np.mean(noise_fit ** 2)
    if p_speech <= 0.0:
        raise DegenerateInputError("zero-power speech")
    if p_noise <= 0.0:
        raise DegenerateInputError("zero-power noise")
    gain = np.sqrt(p_speech / (p_noise * 10.0 ** (spec.snr_db / 10.0)))
    return AudioSignal(speech.samples + gain * noise_fit, speech.sample_rate_hz)


def resample(signal: AudioSignal, target_rate_hz: int) -> AudioSignal:
    """Polyphase windowed-sinc resampling to target_rate_hz."""
    from math import gcd

    from scipy.signal import resample_poly

    if target_rate_hz <= 0:
        raise ValueError(f"target_rate_hz must be positive, got {target_rate_hz}")
    if target_rate_hz == signal.sample_rate_hz:
        return signal
    g = gcd(target_rate_hz, signal.sample_rate_hz)
    up, down = target_rate_hz // g, signal.sample_rate_hz // g
    return AudioSignal(resample_poly(signal.samples, up, down), target_rate_hz)


def activity_mask(signal: AudioSignal, frame_ms: float = 32.0,
                  threshold_db: float = 40.0) -> np.ndarray:
    """Per-sample speech-activity mask from frame energies.

    A frame counts as active when its energy is within threshold_db of
    the loudest frame; the mask is the union of active frame spans.
    """
    seq = frame_signal(signal, frame_ms=frame_ms, overlap=0.5)
    energy = np.sum(seq.frames ** 2, axis=1)
    peak = energy.max()
    if peak <= 0.0:
        return np.zeros(len(signal), dtype=bool)
    active = energy > peak * 10.0 ** (-threshold_db / 10.0)
    mask = np.zeros(len(signal), dtype=bool)
    flen = seq.frame_len
    for q in np.flatnonzero(active):
        s = q * seq.hop
        mask[s:min(s + flen, len(signal))] = True
    return mask

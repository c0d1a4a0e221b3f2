"""Objective intelligibility scoring and SNR measurement.

The intelligibility metric correlates short one-third-octave band
spectrogram segments of the reference and processed signals after
normalizing each segment's band rows and time columns; the score is
the mean correlation over all sliding segments.  All structural
constants sit in one config record so variants can be probed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .signal_core import AudioSignal, resample

EPS_NORM = 1e-20


@dataclass(frozen=True)
class EstoiConfig:
    """Structural constants of the intelligibility metric."""

    target_rate_hz: int = 10000
    frame_len: int = 256
    hop: int = 128
    fft_len: int = 512
    n_bands: int = 15
    lowest_center_hz: float = 150.0
    segment_frames: int = 30
    dyn_range_db: float = 40.0

    def __post_init__(self):
        if self.frame_len > self.fft_len:
            raise ValueError("frame_len cannot exceed fft_len")
        if self.segment_frames < 2:
            raise ValueError("segment_frames must be >= 2")


@dataclass
class EstoiResult:
    score: float
    n_segments: int
    n_skipped: int


def _analysis_window(n: int) -> np.ndarray:
    return np.hanning(n + 2)[1:-1]


def band_matrix(config: EstoiConfig) -> tuple[np.ndarray, np.ndarray]:
    """One-third-octave band membership over rfft bins.

    Band j spans [cf * 2^(-1/6), cf * 2^(1/6)) with cf = lowest center
    times 2^(j/3); edges snap to the nearest FFT bin.
    """
    freqs = np.arange(config.fft_len // 2 + 1) * (config.target_rate_hz / config.fft_len)
    j = np.arange(config.n_bands)
    centers = config.lowest_center_hz * 2.0 ** (j / 3.0)
    low = config.lowest_center_hz * 2.0 ** ((2.0 * j - 1.0) / 6.0)
    high = config.lowest_center_hz * 2.0 ** ((2.0 * j + 1.0) / 6.0)
    obm = np.zeros((config.n_bands, freqs.size))
    for i in range(config.n_bands):
        lo_bin = int(np.argmin(np.square(freqs - low[i])))
        hi_bin = int(np.argmin(np.square(freqs - high[i])))
        obm[i, lo_bin:hi_bin] = 1.0
    return obm, centers


def _frame_stack(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    n_frames = (x.size - frame_len) // hop + 1
    idx = np.arange(n_frames)[:, None] * hop + np.arange(frame_len)[None, :]
    return x[idx]


def _remove_silent_frames(x: np.ndarray, y: np.ndarray, config: EstoiConfig):
    """Drop frames whose reference energy sits more than dyn_range_db
    below the loudest frame, and stitch the rest back by overlap-add."""
    w = _analysis_window(config.frame_len)
    xf = _frame_stack(x, config.frame_len, config.hop) * w
    yf = _frame_stack(y, config.frame_len, config.hop) * w
    energies_db = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + 1e-300)
    keep = energies_db > energies_db.max() - config.dyn_range_db
    xf, yf = xf[keep], yf[keep]
    if xf.shape[0] == 0:
        raise DegenerateInputError("no frames above the silence threshold")
    n = (xf.shape[0] - 1) * config.hop + config.frame_len
    xs = np.zeros(n)
    ys = np.zeros(n)
    for i in range(xf.shape[0]):
        s = i * config.hop
        xs[s:s + config.frame_len] += xf[i]
        ys[s:s + config.frame_len] += yf[i]
    return xs, ys


def _band_spectrogram(x: np.ndarray, obm: np.ndarray, config: EstoiConfig) -> np.ndarray:
    """(n_bands, n_frames) band magnitudes of a silence-stripped signal."""
    w = _analysis_window(config.frame_len)
    frames = _frame_stack(x, config.frame_len, config.hop) * w
    spec = np.fft.rfft(frames, config.fft_len, axis=1)
    power = np.abs(spec) ** 2
    return np.sqrt(power @ obm.T).T


def _normalize_rows_then_cols(seg: np.ndarray) -> np.ndarray:
    """Mean/variance normalize each band row, then each time column.
    Zero-norm rows or columns become zeros instead of dividing by 0."""
    out = seg - seg.mean(axis=-1, keepdims=True)
    norms = np.sqrt(np.sum(out ** 2, axis=-1, keepdims=True))
    out = out * np.where(norms > EPS_NORM, 1.0 / norms, 0.0)
    out = out - out.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(out ** 2, axis=1, keepdims=True))
    return out * np.where(norms > EPS_NORM, 1.0 / norms, 0.0)


def estoi_result(reference: AudioSignal, processed: AudioSignal,
                 config: EstoiConfig = EstoiConfig()) -> EstoiResult:
    """Full scoring pass with segment bookkeeping.

    Both signals are resampled to the metric rate, stripped of silent
    frames (decided on the reference), converted to one-third-octave
    band spectrograms, and compared over sliding segments.  Segments
    with zero energy in either signal are skipped and counted.
    """
    if reference.sample_rate_hz != processed.sample_rate_hz:
        raise ValueError("reference and processed sample rates differ")
    if len(reference) != len(processed):
        raise ValueError(f"length mismatch: {len(reference)} vs {len(processed)}")
    x = resample(reference, config.target_rate_hz).samples
    y = resample(processed, config.target_rate_hz).samples
    if x.size < config.frame_len:
        raise DegenerateInputError("signal shorter than one analysis frame")
    x, y = _remove_silent_frames(x, y, config)
    obm, _ = band_matrix(config)
    xb = _band_spectrogram(x, obm, config)
    yb = _band_spectrogram(y, obm, config)
    n_seg_frames = config.segment_frames
    if xb.shape[1] < n_seg_frames:
        raise DegenerateInputError(
            f"only {xb.shape[1]} frames after silence removal; "
            f"need at least {n_seg_frames} for one segment")
    x_segs = np.lib.stride_tricks.sliding_window_view(
        xb, (config.n_bands, n_seg_frames))[0]
    y_segs = np.lib.stride_tricks.sliding_window_view(
        yb, (config.n_bands, n_seg_frames))[0]
    x_energy = np.sum(x_segs ** 2, axis=(1, 2))
    y_energy = np.sum(y_segs ** 2, axis=(1, 2))
    live = (x_energy > 0.0) & (y_energy > 0.0)
    n_segments = x_segs.shape[0]
    n_skipped = int(n_segments - live.sum())
    if not live.any():
        raise DegenerateInputError("all segments were silent")
    xn = _normalize_rows_then_cols(x_segs[live])
    yn = _normalize_rows_then_cols(y_segs[live])
    per_segment = np.sum(xn * yn, axis=(1, 2)) / n_seg_frames
    return EstoiResult(score=float(per_segment.mean()),
                       n_segments=n_segments, n_skipped=n_skipped)


def estoi(reference: AudioSignal, processed: AudioSignal,
          config: EstoiConfig = EstoiConfig()) -> float:
    """Intelligibility score; 1.0 means processed matches reference."""
    return estoi_result(reference, processed, config).score


def measure_snr(reference: AudioSignal, degraded: AudioSignal) -> float:
    """SNR in dB of degraded against reference, +inf when identical."""
    if len(reference) != len(degraded):
        raise ValueError(f"length mismatch: {len(reference)} vs {len(degraded)}")
    p_ref = float(np.sum(reference.samples ** 2))
    p_err = float(np.sum((degraded.samples - reference.samples) ** 2))
    if p_ref <= 0.0:
        raise DegenerateInputError("zero-power reference")
    if p_err == 0.0:
        return float("inf")
    return 10.0 * np.log10(p_ref / p_err)

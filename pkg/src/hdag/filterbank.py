"""Gammachirp filterbank design, recursive filtering, and enhancement.

Each analysis frame of a voiced stretch gets its own bank: centers at
third-octave steps above the adjusted F0 (or at harmonics of the raw
estimate for the four-filter variant), all sharing a bandwidth
proportional to the anchor frequency.  Filtering is subtractive and
recursive: every band is convolved out of what the previous bands left
behind, so the band signals plus the residual always sum back to the
frame exactly.  Enhancement scales the bands with per-class gains and
adds the residual back unscaled.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from . import pitch
from .signal_core import AudioSignal, FrameSequence, frame_signal, overlap_add
from .pitch import FrameClass

DEFAULT_NUM_FILTERS = 10
DEFAULT_BANDWIDTH_FACTOR = 0.15
DEFAULT_ASYMMETRY = -1.0
DEFAULT_ORDER = 4
CENTER_DROP_FRACTION = 0.45
ENVELOPE_DECAY = 1e-4
PEAK_NORM_TRIGGER = 1.0
PEAK_NORM_TARGET = 0.99

GAINS_LOW = (14.0, 1.0, 4.0, 8.0, 4.0, 3.5, 3.0, 2.0, 2.0, 1.5)
GAINS_HIGH = (14.0, 1.0, 1.0, 4.5, 2.0, 3.5, 2.5, 2.0, 1.5, 1.5)
GTF_F0_GAINS = (5.0, 5.0, 4.0, 2.5)


@dataclass(frozen=True)
class GammachirpSpec:
    """Parameters of one analytic gammachirp kernel."""

    f_c_hz: float
    bandwidth_hz: float
    order: int = DEFAULT_ORDER
    asymmetry: float = DEFAULT_ASYMMETRY

    def __post_init__(self):
        if self.f_c_hz <= 0.0:
            raise ValueError(f"f_c_hz must be positive, got {self.f_c_hz}")
        if self.bandwidth_hz <= 0.0:
            raise ValueError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")

    @property
    def peak_delay_s(self) -> float:
        """Envelope peak time t_c = (n - 1) / (2 pi b)."""
        return (self.order - 1) / (2.0 * np.pi * self.bandwidth_hz)


@dataclass
class GammachirpKernel:
    """Sampled impulse response with its pre-peak sample count.

    taps[peak_index] sits at t = 0; the leading samples cover the
    attack from t = -t_c.  Peak magnitude response is normalized to 1.
    """

    spec: GammachirpSpec
    taps: np.ndarray
    peak_index: int
    sample_rate_hz: int


@dataclass
class FilterOutputs:
    """Band signals from the recursive subtraction plus the residual."""

    bands: np.ndarray
    residual: np.ndarray

    @property
    def n_bands(self) -> int:
        return self.bands.shape[0]


@dataclass(frozen=True)
class FilterbankConfig:
    """Bank layout and per-class gains.

    spacing "third_octave" centers filters at 2^(k/3) times the anchor
    frequency; "harmonic" uses integer multiples (k+1).  The bandwidth
    of every filter is bandwidth_factor times the anchor.
    """

    spacing: str = "third_octave"
    num_filters: int = DEFAULT_NUM_FILTERS
    bandwidth_factor: float = DEFAULT_BANDWIDTH_FACTOR
    asymmetry: float = DEFAULT_ASYMMETRY
    order: int = DEFAULT_ORDER
    gains_low: tuple = GAINS_LOW
    gains_high: tuple = GAINS_HIGH

    def __post_init__(self):
        if self.spacing not in ("third_octave", "harmonic"):
            raise ValueError(f"unknown spacing {self.spacing!r}")
        if self.num_filters < 1:
            raise ValueError("num_filters must be >= 1")
        if self.bandwidth_factor <= 0.0:
            raise ValueError("bandwidth_factor must be positive")
        for name, gains in (("gains_low", self.gains_low), ("gains_high", self.gains_high)):
            if len(gains) != self.num_filters:
                raise ValueError(f"{name} has {len(gains)} entries for "
                                 f"{self.num_filters} filters")

    def gains_for(self, frame_class: FrameClass) -> np.ndarray:
        if frame_class is FrameClass.HIGH_PITCH:
            return np.asarray(self.gains_high, dtype=np.float64)
        return np.asarray(self.gains_low, dtype=np.float64)


def gtf_f0_config() -> FilterbankConfig:
    """Four gammatone filters at harmonics of the estimated F0 with
    fixed gains, the harmonic-spacing baseline variant."""
    return FilterbankConfig(spacing="harmonic", num_filters=4,
                            bandwidth_factor=0.25, asymmetry=0.0,
                            gains_low=GTF_F0_GAINS, gains_high=GTF_F0_GAINS)


def default_gains(frame_class: FrameClass) -> np.ndarray:
    """Built-in gain vector for a pitch class (ten filters)."""
    if frame_class is FrameClass.LOW_PITCH:
        return np.asarray(GAINS_LOW)
    if frame_class is FrameClass.HIGH_PITCH:
        return np.asarray(GAINS_HIGH)
    raise ValueError("no gains are defined for unvoiced frames")


def third_octave_centers(anchor_hz: float, count: int = DEFAULT_NUM_FILTERS) -> np.ndarray:
    """Center frequencies 2^(k/3) * anchor for k = 0..count-1.

    Built as ratio * exact power of two so that every third center is
    exactly double: centers[k + 3] == 2 * centers[k] bit for bit.
    """
    if anchor_hz <= 0.0:
        raise ValueError(f"anchor_hz must be positive, got {anchor_hz}")
    if count < 1:
        raise ValueError("count must be >= 1")
    k = np.arange(count)
    ratios = 2.0 ** (np.arange(3) / 3.0)
    return anchor_hz * ratios[k % 3] * np.exp2((k // 3).astype(np.float64))


def harmonic_centers(anchor_hz: float, count: int) -> np.ndarray:
    if anchor_hz <= 0.0:
        raise ValueError(f"anchor_hz must be positive, got {anchor_hz}")
    return anchor_hz * np.arange(1, count + 1, dtype=np.float64)


def _tail_samples(spec: GammachirpSpec, sample_rate_hz: int) -> int:
    """Length of the decaying tail after t = 0: where the envelope
    u^(n-1) exp(-2 pi b u) falls to ENVELOPE_DECAY of its peak."""
    n, b = spec.order, spec.bandwidth_hz
    t_c = spec.peak_delay_s

    def rel(u):
        return (u / t_c) ** (n - 1) * np.exp(-2.0 * np.pi * b * (u - t_c))

    hi = 2.0 * t_c
    while rel(hi) > ENVELOPE_DECAY:
        hi *= 2.0
    lo = t_c
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if rel(mid) > ENVELOPE_DECAY:
            lo = mid
        else:
            hi = mid
    return int(np.ceil((hi - t_c) * sample_rate_hz))


def design_gammachirp(spec: GammachirpSpec, sample_rate_hz: int,
                      max_tail: Optional[int] = None) -> GammachirpKernel:
    """Sample the gammachirp impulse response and normalize its peak
    magnitude response to one.

    The kernel covers t in [-t_c, T_end]: the attack back to where the
    envelope leaves zero, and a tail out to the ENVELOPE_DECAY point,
    optionally capped at max_tail samples (the frame length in the
    enhancement pipeline).
    """
    if spec.f_c_hz >= sample_rate_hz / 2.0:
        raise ValueError(f"center {spec.f_c_hz} Hz is not below Nyquist "
                         f"({sample_rate_hz / 2.0} Hz)")
    t_c = spec.peak_delay_s
    pre = int(np.floor(t_c * sample_rate_hz))
    tail = _tail_samples(spec, sample_rate_hz)
    if max_tail is not None:
        tail = min(tail, max_tail)
    k = np.arange(-pre, tail + 1)
    t = k / sample_rate_hz
    u = t + t_c
    safe = u > 0.0
    u_pos = np.where(safe, u, 1.0)
    envelope = u_pos ** (spec.order - 1) * np.exp(-2.0 * np.pi * spec.bandwidth_hz * u_pos)
    phase = 2.0 * np.pi * spec.f_c_hz * t + spec.asymmetry * np.log(u_pos)
    taps = np.where(safe, envelope * np.cos(phase), 0.0)
    nfft = 1 << int(np.ceil(np.log2(max(16384, 4 * taps.size))))
    peak_mag = np.abs(np.fft.rfft(taps, nfft)).max()
    if peak_mag <= 0.0:
        raise ValueError("degenerate kernel: zero frequency response")
    return GammachirpKernel(spec=spec, taps=taps / peak_mag, peak_index=pre,
                            sample_rate_hz=sample_rate_hz)


def kernel_peak_frequency(kernel: GammachirpKernel, nfft: int = 1 << 17) -> float:
    """Frequency of the magnitude-response maximum, for diagnostics."""
    mag = np.abs(np.fft.rfft(kernel.taps, nfft))
    return float(np.argmax(mag) * kernel.sample_rate_hz / nfft)


def apply_kernel(x: np.ndarray, kernel: GammachirpKernel) -> np.ndarray:
    """Convolve and advance by the kernel's pre-peak delay, truncated
    to the input length, so the envelope peak acts at lag zero."""
    full = fftconvolve(x, kernel.taps)
    return full[kernel.peak_index:kernel.peak_index + x.size]


def recursive_filter(frame: np.ndarray, kernels: Sequence[GammachirpKernel]) -> FilterOutputs:
    """Subtractive cascade: band k filters what bands 1..k-1 left.

    By construction bands.sum(axis=0) + residual equals the frame to
    float precision regardless of the kernels.
    """
    x = np.asarray(frame, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("frame must be 1-D")
    bands = np.empty((len(kernels), x.size))
    current = x.copy()
    for i, kernel in enumerate(kernels):
        y = apply_kernel(current, kernel)
        bands[i] = y
        current = current - y
    return FilterOutputs(bands=bands, residual=current)


def reconstruct_frame(outputs: FilterOutputs, gains: np.ndarray) -> np.ndarray:
    """Weighted band sum plus the untouched residual."""
    gains = np.asarray(gains, dtype=np.float64)
    if gains.shape != (outputs.n_bands,):
        raise ValueError(f"got {gains.size} gains for {outputs.n_bands} bands")
    return gains @ outputs.bands + outputs.residual


@dataclass
class FrameRecord:
    """Per-frame diagnostics captured during enhancement."""

    frame_index: int
    voiced: bool
    f_est_hz: Optional[float] = None
    salience: Optional[float] = None
    frame_class: FrameClass = FrameClass.UNVOICED
    f_bar_hz: Optional[float] = None
    f_adj_hz: Optional[float] = None
    n_filters: int = 0
    dropped_centers: int = 0
    gains: tuple = ()
    fsffe_fallback: bool = False


@dataclass
class EnhancementReport:
    """Outcome of one enhancement run."""

    method: str
    sample_rate_hz: int
    frames: list
    normalization_factor: float = 1.0
    seed: int = 0

    @property
    def n_voiced(self) -> int:
        return sum(1 for f in self.frames if f.voiced)


def build_bank(config: FilterbankConfig, anchor_hz: float, sample_rate_hz: int,
               max_tail: Optional[int] = None) -> tuple[list, int]:
    """Design the kernels for one frame; returns (kernels, dropped).

    Centers at or above CENTER_DROP_FRACTION of the sample rate are
    dropped from the top of the bank and counted.
    """
    if config.spacing == "third_octave":
        centers = third_octave_centers(anchor_hz, config.num_filters)
    else:
        centers = harmonic_centers(anchor_hz, config.num_filters)
    keep = centers < CENTER_DROP_FRACTION * sample_rate_hz
    kept = centers[keep]
    dropped = int(centers.size - kept.size)
    bw = config.bandwidth_factor * anchor_hz
    kernels = [design_gammachirp(GammachirpSpec(f_c_hz=float(fc), bandwidth_hz=bw,
                                                order=config.order,
                                                asymmetry=config.asymmetry),
                                 sample_rate_hz, max_tail=max_tail)
               for fc in kept]
    return kernels, dropped


def _frame_seed(seed: int, frame_index: int) -> int:
    """Stable per-frame seed, independent of processing order."""
    return int(np.random.SeedSequence((seed, frame_index)).generate_state(1, np.uint64)[0])


def enhance_signal(signal: AudioSignal, config: FilterbankConfig,
                   *, frame_ms: float = 32.0, overlap: float = 0.5,
                   search: pitch.F0SearchRange = pitch.F0SearchRange(),
                   salience_threshold: float = pitch.DEFAULT_SALIENCE_THRESHOLD,
                   boundary_hz: float = pitch.DEFAULT_CLASS_BOUNDARY_HZ,
                   ensemble_size: int = 50, noise_std_ratio: float = 0.2,
                   sd_threshold: float = 0.2, max_siftings: int = 10,
                   voiced_mask: Optional[np.ndarray] = None,
                   seed: int = 0, normalize: bool = True,
                   method: str = "hdag") -> tuple[AudioSignal, EnhancementReport]:
    """Frame-wise harmonic-band amplification of a noisy signal.

    Every voiced frame is pitch-analyzed, classified, filtered through
    a bank anchored at its (adjusted) F0, and rebuilt from gain-scaled
    bands plus the residual.  Unvoiced frames pass through.  Frames are
    overlap-added with a Hann synthesis window; if the result peaks
    above PEAK_NORM_TRIGGER it is scaled to PEAK_NORM_TARGET and the
    factor is reported.

    voiced_mask, when given, gates which frames are analyzed at all;
    its length must match the frame count.  With spacing "harmonic"
    the bank is anchored at the raw frame estimate instead of the
    class-adjusted one.
    """
    seq = frame_signal(signal, frame_ms=frame_ms, overlap=overlap)
    if voiced_mask is not None:
        voiced_mask = np.asarray(voiced_mask, dtype=bool)
        if voiced_mask.size != seq.n_frames:
            raise ValueError(f"voiced_mask has {voiced_mask.size} entries for "
                             f"{seq.n_frames} frames")
    fs = signal.sample_rate_hz
    out_frames = seq.frames.copy()
    records = []
    for q in range(seq.n_frames):
        if voiced_mask is not None and not voiced_mask[q]:
            records.append(FrameRecord(frame_index=q, voiced=False))
            continue
        pf = pitch.analyze_frame(seq.frames[q], fs, frame_index=q, search=search,
                                 salience_threshold=salience_threshold,
                                 boundary_hz=boundary_hz,
                                 ensemble_size=ensemble_size,
                                 noise_std_ratio=noise_std_ratio,
                                 sd_threshold=sd_threshold,
                                 max_siftings=max_siftings,
                                 seed=_frame_seed(seed, q))
        if not pf.voiced:
            records.append(FrameRecord(frame_index=q, voiced=False))
            continue
        anchor = pf.f_est_hz if config.spacing == "harmonic" else pf.f_adj_hz
        kernels, dropped = build_bank(config, anchor, fs, max_tail=seq.frame_len)
        outputs = recursive_filter(seq.frames[q], kernels)
        gains = config.gains_for(pf.frame_class)[:outputs.n_bands]
        out_frames[q] = reconstruct_frame(outputs, gains)
        records.append(FrameRecord(
            frame_index=q, voiced=True, f_est_hz=pf.f_est_hz, salience=pf.salience,
            frame_class=pf.frame_class, f_bar_hz=pf.f_bar_hz, f_adj_hz=anchor,
            n_filters=outputs.n_bands, dropped_centers=dropped,
            gains=tuple(float(g) for g in gains), fsffe_fallback=pf.fsffe_fallback))
    out_seq = FrameSequence(frames=out_frames, sample_rate_hz=fs, hop=seq.hop,
                            source_len=seq.source_len,
                            voiced_mask=np.array([r.voiced for r in records]))
    enhanced = overlap_add(out_seq)
    factor = 1.0
    peak = np.max(np.abs(enhanced.samples))
    if normalize and peak > PEAK_NORM_TRIGGER:
        factor = PEAK_NORM_TARGET / peak
        enhanced = AudioSignal(enhanced.samples * factor, fs)
    report = EnhancementReport(method=method, sample_rate_hz=fs, frames=records,
                               normalization_factor=factor, seed=seed)
    return enhanced, report

"""F0 estimation from mode envelopes and low/high pitch-class decisions.

The per-frame estimate comes from the autocorrelation of the analytic
envelopes of the first four ensemble-EMD modes: per mode, the smallest
lag with a qualifying local autocorrelation maximum inside the search
band gives a candidate.  The frame estimate combines the per-mode
candidates — median lag when three or more modes qualify, otherwise
highest salience — followed by two subharmonic safeguards (half-lag
preference and a multiple-consistency downshift).  A second estimator
runs on the raw modes themselves; the four resulting values feed a
pairwise normalized-distance vote that labels the frame low or high
pitch, and the label drives a fixed octave correction of the estimate.
"""

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import emd
from .errors import DegenerateInputError

DEFAULT_F_MIN_HZ = 50.0
DEFAULT_F_MAX_HZ = 400.0
DEFAULT_SALIENCE_THRESHOLD = 0.30
DEFAULT_CLASS_BOUNDARY_HZ = 200.0
ADJUSTED_F0_CAP_HZ = 800.0
N_CLASSIFIER_MODES = 4
MIN_VOTING_CANDIDATES = 3
OCTAVE_SALIENCE_RATIO = 0.8
ELEVATION_FLOOR = 0.15
DOWNSHIFT_CHECKS = ((3, 2), (2, 3))


class FrameClass(enum.Enum):
    LOW_PITCH = "low"
    HIGH_PITCH = "high"
    UNVOICED = "unvoiced"


class NotEnoughEstimates(ValueError):
    """Fewer than two valid per-mode estimates; classification must
    fall back to the frame estimate alone."""


@dataclass(frozen=True)
class F0SearchRange:
    """Fundamental frequency search band."""

    f_min_hz: float = DEFAULT_F_MIN_HZ
    f_max_hz: float = DEFAULT_F_MAX_HZ

    def __post_init__(self):
        if not 0.0 < self.f_min_hz < self.f_max_hz:
            raise ValueError(f"need 0 < f_min < f_max, got [{self.f_min_hz}, {self.f_max_hz}]")

    def tau_bounds(self, sample_rate_hz: int) -> tuple[int, int]:
        """Lag window [tau_min, tau_max] in samples.  Rounded inward so
        any lag in the window maps back inside [f_min, f_max]."""
        tau_min = int(np.ceil(sample_rate_hz / self.f_max_hz))
        tau_max = int(np.floor(sample_rate_hz / self.f_min_hz))
        if tau_min < 1 or tau_min > tau_max:
            raise ValueError("search range collapses at this sample rate")
        return tau_min, tau_max


@dataclass(frozen=True)
class F0Candidate:
    f0_hz: float
    salience: float
    lag: int


@dataclass
class DistanceMatrix:
    """Pairwise normalized distances between per-mode estimates.

    Entries touching an invalid estimate are zero; their row_sums are
    +inf so the row can never be selected.
    """

    values: np.ndarray
    row_sums: np.ndarray
    valid: np.ndarray


@dataclass
class FsffeResult:
    frame_class: FrameClass
    f_bar_hz: float
    distances: DistanceMatrix
    selected: tuple[int, int]


@dataclass
class PitchFrame:
    """Everything the enhancement stage needs to know about one frame."""

    frame_index: int
    f_est_hz: Optional[float]
    salience: Optional[float]
    per_imf_f0: np.ndarray = field(default_factory=lambda: np.full(N_CLASSIFIER_MODES, np.nan))
    f_bar_hz: Optional[float] = None
    frame_class: FrameClass = FrameClass.UNVOICED
    f_adj_hz: Optional[float] = None
    fsffe_fallback: bool = False

    @property
    def voiced(self) -> bool:
        return self.f_est_hz is not None


def acf(values: np.ndarray, max_lag: int) -> np.ndarray:
    """Raw autocorrelation r[tau] = sum_t x[t] x[t+tau] for tau = 0..max_lag."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("values must be 1-D")
    if max_lag >= x.size:
        raise ValueError(f"max_lag {max_lag} needs a signal longer than {max_lag} samples")
    full = np.correlate(x, x, mode="full")
    return full[x.size - 1:x.size + max_lag]


def _pick_candidate(r: np.ndarray, tau_min: int, tau_max: int,
                    sample_rate_hz: int,
                    salience_threshold: float) -> Optional[F0Candidate]:
    """Smallest lag in [tau_min, tau_max] where r has a strict local
    maximum whose salience r[lag]/r[0] clears the voicing threshold.

    Sub-threshold wiggles are skipped rather than ending the search;
    the threshold is what qualifies a local maximum as a peak.
    """
    if r[0] <= 0.0:
        return None
    lags = np.arange(max(tau_min, 1), min(tau_max, r.size - 2) + 1)
    if lags.size == 0:
        return None
    seg = r[lags]
    is_peak = (seg > r[lags - 1]) & (seg > r[lags + 1]) & \
        (seg >= salience_threshold * r[0])
    peaks = lags[is_peak]
    if peaks.size == 0:
        return None
    lag = int(peaks[0])
    return F0Candidate(f0_hz=sample_rate_hz / lag,
                       salience=float(r[lag] / r[0]), lag=lag)


def f0_candidate(envelope: emd.Envelope, sample_rate_hz: int,
                 search: F0SearchRange = F0SearchRange(),
                 salience_threshold: float = DEFAULT_SALIENCE_THRESHOLD
                 ) -> Optional[F0Candidate]:
    """F0 candidate from the envelope autocorrelation, or None when the
    envelope carries no periodicity above the voicing threshold.

    The envelope mean is removed before correlating: an amplitude
    envelope is strictly positive, and its DC pedestal would otherwise
    hand every aperiodic frame a salience near one.  Salience is the
    normalized autocovariance, so flat noise envelopes land near zero
    and the 0.30 threshold separates voiced from unvoiced.
    """
    tau_min, tau_max = search.tau_bounds(sample_rate_hz)
    if envelope.values.size <= tau_max:
        raise ValueError(f"envelope length {envelope.values.size} does not cover "
                         f"the lag window (tau_max {tau_max})")
    centered = envelope.values - envelope.values.mean()
    r = acf(centered, min(tau_max + 1, centered.size - 1))
    return _pick_candidate(r, tau_min, tau_max, sample_rate_hz, salience_threshold)


def raw_acf_estimate(mode: np.ndarray, sample_rate_hz: int,
                     search: F0SearchRange = F0SearchRange(),
                     salience_threshold: float = DEFAULT_SALIENCE_THRESHOLD
                     ) -> Optional[float]:
    """Per-mode estimator used by the classifier: the candidate picker
    applied to the autocorrelation of the raw (mean-removed) mode."""
    tau_min, tau_max = search.tau_bounds(sample_rate_hz)
    mode = np.asarray(mode, dtype=np.float64)
    if mode.size <= tau_max:
        raise ValueError(f"mode length {mode.size} does not cover "
                         f"the lag window (tau_max {tau_max})")
    centered = mode - mode.mean()
    cand = _pick_candidate(acf(centered, min(tau_max + 1, centered.size - 1)),
                           tau_min, tau_max, sample_rate_hz, salience_threshold)
    return None if cand is None else cand.f0_hz


def hht_amp_estimate(frame: np.ndarray, sample_rate_hz: int,
                     search: F0SearchRange = F0SearchRange(),
                     salience_threshold: float = DEFAULT_SALIENCE_THRESHOLD,
                     ensemble_size: int = emd.DEFAULT_ENSEMBLE_SIZE,
                     noise_std_ratio: float = emd.DEFAULT_NOISE_STD_RATIO,
                     seed: int = 0) -> Optional[F0Candidate]:
    """Frame-level F0 from envelope autocorrelations of the first
    modes; combines the per-mode candidates per
    best_envelope_candidate, or None (unvoiced).

    Only the first four modes are consumed, so decomposition stops
    there; modes 1..4 are identical to what a deeper run would give.
    """
    modes = emd.eemd_decompose(frame, ensemble_size=ensemble_size,
                               noise_std_ratio=noise_std_ratio,
                               max_imfs=N_CLASSIFIER_MODES, seed=seed)
    return best_envelope_candidate(modes, sample_rate_hz, search, salience_threshold)


def _unbiased_elevation(r: np.ndarray, lag: int, halfwidth: int,
                        n_samples: int) -> float:
    """How elevated the autocorrelation is near a lag, on a scale
    comparable across lags: max of r/(n - lag) over the window,
    normalized by r[0]/n.  The 1/(n - lag) factor undoes the shrinking
    summation window of the raw estimator; past 0.85 n too few terms
    remain for the value to mean anything, so the answer is zero.
    """
    if r[0] <= 0.0 or lag >= int(0.85 * n_samples):
        return 0.0
    lo = max(1, lag - halfwidth)
    hi = min(lag + halfwidth + 1, r.size)
    if lo >= hi:
        return 0.0
    lam = np.arange(lo, hi)
    return float((r[lo:hi] / (n_samples - lam)).max() / (r[0] / n_samples))


def best_envelope_candidate(modes: emd.ImfSet, sample_rate_hz: int,
                            search: F0SearchRange,
                            salience_threshold: float) -> Optional[F0Candidate]:
    """Combine the per-mode envelope candidates into one frame estimate.

    Each mode contributes at most one candidate: the smallest lag in
    the search band where the centered-envelope autocorrelation has a
    local maximum clearing the voicing threshold.  With three or more
    candidates the median lag wins — a majority vote that a single
    biased mode cannot drag — with the even-count tie going to the
    higher salience of the two middle lags; with fewer, the highest
    salience wins.  Two subharmonic safeguards follow: a candidate at
    half the winning lag with comparable salience replaces the winner,
    and a winner whose autocorrelation is also elevated at lag/2 or
    lag/3 *and* at a multiple of that shorter lag that is not a
    multiple of the winner (3/2 or 2/3 of the lag) is folded down to
    the shorter period, re-centered on the local maximum there.
    """
    tau_min, tau_max = search.tau_bounds(sample_rate_hz)
    cands: list[tuple[F0Candidate, np.ndarray, int]] = []
    for k in range(min(modes.n_imfs, N_CLASSIFIER_MODES)):
        env = emd.analytic_envelope(modes.imfs[k])
        if env.values.size <= tau_max:
            raise ValueError(f"mode length {env.values.size} does not cover "
                             f"the lag window (tau_max {tau_max})")
        centered = env.values - env.values.mean()
        r = acf(centered, centered.size - 1)
        cand = _pick_candidate(r, tau_min, tau_max, sample_rate_hz,
                               salience_threshold)
        if cand is not None:
            cands.append((cand, r, centered.size))
    if not cands:
        return None
    if len(cands) >= MIN_VOTING_CANDIDATES:
        order = sorted(cands, key=lambda c: c[0].lag)
        mid = len(order) // 2
        if len(order) % 2 == 1:
            best = order[mid]
        else:
            best = max(order[mid - 1:mid + 1], key=lambda c: c[0].salience)
    else:
        best = max(cands, key=lambda c: c[0].salience)
    for cand in cands:
        if abs(best[0].lag - 2 * cand[0].lag) <= max(2, cand[0].lag // 8) and \
                cand[0].salience >= OCTAVE_SALIENCE_RATIO * best[0].salience:
            best = cand
            break
    lag, r, n_samples = best[0].lag, best[1], best[2]
    for divisor, multiple in DOWNSHIFT_CHECKS:
        q = lag // divisor
        if q >= tau_min and \
                _unbiased_elevation(r, q, 2, n_samples) >= ELEVATION_FLOOR and \
                _unbiased_elevation(r, multiple * q, max(2, q // 8),
                                    n_samples) >= ELEVATION_FLOOR:
            lo = max(tau_min, q - 2)
            hi = min(q + 3, r.size)
            lag = lo + int(np.argmax(r[lo:hi]))
            break
    return F0Candidate(f0_hz=sample_rate_hz / lag,
                       salience=float(r[lag] / r[0]), lag=lag)


def per_imf_pitch_vector(modes: emd.ImfSet, sample_rate_hz: int,
                         search: F0SearchRange = F0SearchRange(),
                         estimator: Optional[Callable] = None) -> np.ndarray:
    """Estimates for the first four modes as a length-4 vector, NaN
    where a mode is missing or yields no estimate.

    estimator(mode, sample_rate_hz, search) may be swapped for any
    other per-mode pitch tracker.
    """
    if estimator is None:
        estimator = raw_acf_estimate
    out = np.full(N_CLASSIFIER_MODES, np.nan)
    for k in range(min(modes.n_imfs, N_CLASSIFIER_MODES)):
        est = estimator(modes.imfs[k], sample_rate_hz, search)
        if est is not None:
            out[k] = est
    return out


def fsffe_classify(per_imf_f0: np.ndarray,
                   boundary_hz: float = DEFAULT_CLASS_BOUNDARY_HZ) -> FsffeResult:
    """Label a frame low or high pitch from the per-mode estimates.

    Pairwise normalized distances |fi - fj| / (fi + fj) are summed per
    row; the two estimates with the smallest row sums (ties broken
    toward the lower mode index) are averaged, and the frame is low
    pitch when that average is <= boundary_hz.

    Raises NotEnoughEstimates with fewer than two valid entries.
    """
    est = np.asarray(per_imf_f0, dtype=np.float64)
    if est.shape != (N_CLASSIFIER_MODES,):
        raise ValueError(f"expected a length-{N_CLASSIFIER_MODES} vector")
    valid = np.isfinite(est) & (est > 0.0)
    values = np.zeros((N_CLASSIFIER_MODES, N_CLASSIFIER_MODES))
    vi = np.flatnonzero(valid)
    for a in vi:
        for b in vi:
            if a < b:
                d = abs((est[a] - est[b]) / (est[a] + est[b]))
                values[a, b] = values[b, a] = d
    row_sums = np.where(valid, values.sum(axis=1), np.inf)
    dm = DistanceMatrix(values=values, row_sums=row_sums, valid=valid)
    if vi.size < 2:
        raise NotEnoughEstimates(f"only {vi.size} valid per-mode estimates")
    order = np.argsort(row_sums, kind="stable")
    first, second = int(order[0]), int(order[1])
    f_bar = 0.5 * (est[first] + est[second])
    cls = FrameClass.LOW_PITCH if f_bar <= boundary_hz else FrameClass.HIGH_PITCH
    return FsffeResult(frame_class=cls, f_bar_hz=f_bar, distances=dm,
                       selected=(first, second))


def adjust_f0(f_est_hz: float, frame_class: FrameClass) -> float:
    """Octave correction of the frame estimate by pitch class.

    Low pitch halves estimates in [200, 400]; high pitch quadruples
    [50, 100] and doubles (100, 200].  Anything else passes through.
    The result is capped at ADJUSTED_F0_CAP_HZ.
    """
    if f_est_hz <= 0.0:
        raise ValueError(f"f_est_hz must be positive, got {f_est_hz}")
    if frame_class is FrameClass.LOW_PITCH:
        adjusted = f_est_hz / 2.0 if 200.0 <= f_est_hz <= 400.0 else f_est_hz
    elif frame_class is FrameClass.HIGH_PITCH:
        if 50.0 <= f_est_hz <= 100.0:
            adjusted = 4.0 * f_est_hz
        elif 100.0 < f_est_hz <= 200.0:
            adjusted = 2.0 * f_est_hz
        else:
            adjusted = f_est_hz
    else:
        raise ValueError("cannot adjust an unvoiced frame")
    return min(adjusted, ADJUSTED_F0_CAP_HZ)


def analyze_frame(frame: np.ndarray, sample_rate_hz: int, frame_index: int = 0,
                  search: F0SearchRange = F0SearchRange(),
                  salience_threshold: float = DEFAULT_SALIENCE_THRESHOLD,
                  boundary_hz: float = DEFAULT_CLASS_BOUNDARY_HZ,
                  ensemble_size: int = emd.DEFAULT_ENSEMBLE_SIZE,
                  noise_std_ratio: float = emd.DEFAULT_NOISE_STD_RATIO,
                  sd_threshold: float = emd.DEFAULT_SD_THRESHOLD,
                  max_siftings: int = emd.DEFAULT_MAX_SIFTINGS,
                  seed: int = 0,
                  estimator: Optional[Callable] = None) -> PitchFrame:
    """Run the full per-frame pitch stage on one analysis frame.

    Decomposes once and reuses the modes for both the frame estimate
    and the classifier vector.  When the classifier cannot run the
    class falls back to comparing f_est against the boundary and the
    estimate is left unadjusted.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if not np.any(frame):
        return PitchFrame(frame_index=frame_index, f_est_hz=None, salience=None)
    modes = emd.eemd_decompose(frame, ensemble_size=ensemble_size,
                               noise_std_ratio=noise_std_ratio,
                               max_imfs=N_CLASSIFIER_MODES, seed=seed,
                               sd_threshold=sd_threshold, max_siftings=max_siftings)
    cand = best_envelope_candidate(modes, sample_rate_hz, search, salience_threshold)
    if cand is None:
        return PitchFrame(frame_index=frame_index, f_est_hz=None, salience=None)
    vector = per_imf_pitch_vector(modes, sample_rate_hz, search, estimator)
    try:
        fsffe = fsffe_classify(vector, boundary_hz)
        frame_class, f_bar = fsffe.frame_class, fsffe.f_bar_hz
        f_adj = adjust_f0(cand.f0_hz, frame_class)
        fallback = False
    except NotEnoughEstimates:
        frame_class = (FrameClass.LOW_PITCH if cand.f0_hz <= boundary_hz
                       else FrameClass.HIGH_PITCH)
        f_bar = None
        f_adj = cand.f0_hz
        fallback = True
    return PitchFrame(frame_index=frame_index, f_est_hz=cand.f0_hz,
                      salience=cand.salience, per_imf_f0=vector, f_bar_hz=f_bar,
                      frame_class=frame_class, f_adj_hz=f_adj,
                      fsffe_fallback=fallback)

"""Harmonic-band speech enhancement toolkit.

Pipeline: ensemble-EMD pitch analysis per frame, low/high pitch
classification with octave correction, a per-frame gammachirp
filterbank anchored at the corrected F0, and class-specific band gains
recombined with the unfiltered residual.
"""

from .config import PipelineConfig, load_config, save_config
from .emd import ImfSet, analytic_envelope, eemd_decompose, emd_decompose
from .errors import DegenerateInputError, FormatError, UsageError
from .filterbank import (EnhancementReport, FilterbankConfig, GammachirpSpec,
                         default_gains, design_gammachirp, enhance_signal,
                         gtf_f0_config, recursive_filter, reconstruct_frame,
                         third_octave_centers)
from .metrics import EstoiConfig, estoi, estoi_result, measure_snr
from .pitch import (F0SearchRange, FrameClass, PitchFrame, acf, adjust_f0,
                    analyze_frame, f0_candidate, fsffe_classify,
                    hht_amp_estimate, per_imf_pitch_vector)
from .signal_core import (AudioSignal, FrameSequence, MixSpec, frame_signal,
                          mix_at_snr, overlap_add, read_wav, resample, write_wav)
from .synth import make_noise, speech_shaped_noise, synth_vowel, white_noise

__version__ = "0.1.0"

__all__ = [
    "AudioSignal", "DegenerateInputError", "EnhancementReport", "EstoiConfig",
    "F0SearchRange", "FilterbankConfig", "FormatError", "FrameClass",
    "FrameSequence", "GammachirpSpec", "ImfSet", "MixSpec", "PipelineConfig",
    "PitchFrame", "UsageError", "acf", "adjust_f0", "analytic_envelope",
    "analyze_frame", "default_gains", "design_gammachirp", "eemd_decompose",
    "emd_decompose", "enhance_signal", "estoi", "estoi_result", "f0_candidate",
    "frame_signal", "fsffe_classify", "gtf_f0_config", "hht_amp_estimate",
    "load_config", "make_noise", "measure_snr", "mix_at_snr", "overlap_add",
    "per_imf_pitch_vector", "read_wav", "reconstruct_frame", "recursive_filter",
    "resample", "save_config", "speech_shaped_noise", "synth_vowel",
    "third_octave_centers", "white_noise", "write_wav",
]

"""Pipeline configuration: one flat record, grouped into file sections.

The on-disk format is INI-style key = value text with one section per
processing stage.  Any subset of keys may appear; missing keys keep
their defaults.  Unknown sections or keys are usage errors so typos
cannot silently run with defaults.
"""

import configparser
import dataclasses
from dataclasses import dataclass

from .errors import UsageError
from .filterbank import (DEFAULT_ASYMMETRY, DEFAULT_BANDWIDTH_FACTOR,
                         DEFAULT_NUM_FILTERS, DEFAULT_ORDER, GAINS_HIGH,
                         GAINS_LOW, FilterbankConfig)


@dataclass(frozen=True)
class PipelineConfig:
    # signal
    sample_rate_hz: int = 16000
    frame_ms: float = 32.0
    overlap: float = 0.5
    # emd
    ensemble_size: int = 50
    noise_std_ratio: float = 0.2
    max_imfs: int = 8
    sd_threshold: float = 0.2
    max_siftings: int = 10
    # pitch
    f_min_hz: float = 50.0
    f_max_hz: float = 400.0
    salience_threshold: float = 0.30
    boundary_hz: float = 200.0
    # filterbank
    spacing: str = "third_octave"
    num_filters: int = DEFAULT_NUM_FILTERS
    bandwidth_factor: float = DEFAULT_BANDWIDTH_FACTOR
    asymmetry: float = DEFAULT_ASYMMETRY
    order: int = DEFAULT_ORDER
    gains_low: tuple = GAINS_LOW
    gains_high: tuple = GAINS_HIGH
    # enhance
    normalize: bool = True

    def filterbank_config(self) -> FilterbankConfig:
        return FilterbankConfig(spacing=self.spacing, num_filters=self.num_filters,
                                bandwidth_factor=self.bandwidth_factor,
                                asymmetry=self.asymmetry, order=self.order,
                                gains_low=self.gains_low, gains_high=self.gains_high)


SECTIONS = {
    "signal": ("sample_rate_hz", "frame_ms", "overlap"),
    "emd": ("ensemble_size", "noise_std_ratio", "max_imfs", "sd_threshold",
            "max_siftings"),
    "pitch": ("f_min_hz", "f_max_hz", "salience_threshold", "boundary_hz"),
    "filterbank": ("spacing", "num_filters", "bandwidth_factor", "asymmetry",
                   "order", "gains_low", "gains_high"),
    "enhance": ("normalize",),
}

_FIELD_TYPES = {f.name: getattr(f.type, "__name__", str(f.type))
                for f in dataclasses.fields(PipelineConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "tuple":
            return tuple(float(part) for part in raw.split(","))
        return raw
    except ValueError as exc:
        raise UsageError(f"config key {key}: {exc}") from exc


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(f"{v:g}" for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return f"{value}"


def apply_overrides(base: PipelineConfig, parser: configparser.ConfigParser,
                    skip_sections: tuple = ()) -> PipelineConfig:
    """Overlay parsed sections onto a config, validating every key."""
    updates = {}
    for section in parser.sections():
        if section in skip_sections:
            continue
        if section not in SECTIONS:
            raise UsageError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise UsageError(f"unknown key {key!r} in section [{section}]")
            updates[key] = _parse_value(key, raw)
    try:
        return dataclasses.replace(base, **updates)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def load_config(path, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        try:
            parser.read_file(fh)
        except configparser.Error as exc:
            raise UsageError(f"{path}: {exc}") from exc
    return apply_overrides(base, parser)


def config_lines(config: PipelineConfig) -> list[str]:
    """Effective configuration as 'section.key = value' lines, the form
    echoed into every report header."""
    lines = []
    for section, keys in SECTIONS.items():
        for key in keys:
            lines.append(f"{section}.{key} = {_format_value(getattr(config, key))}")
    return lines


def save_config(path, config: PipelineConfig) -> None:
    with open(path, "w") as fh:
        for section, keys in SECTIONS.items():
            fh.write(f"[{section}]\n")
            for key in keys:
                fh.write(f"{key} = {_format_value(getattr(config, key))}\n")
            fh.write("\n")

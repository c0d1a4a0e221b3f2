"""Command line front end.

Subcommands: enhance one file, evaluate a manifest grid, sweep a
design parameter, synthesize test vowels, and generate noise.  Every
delimited report gets the effective configuration echoed into its
header and a rendered figure next to it.

Exit codes: 0 success, 1 usage, 2 I/O or file format, 3 numerical.
"""

import argparse
import configparser
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import PipelineConfig, apply_overrides, config_lines, load_config
from .errors import DegenerateInputError, FormatError, UsageError
from .filterbank import FilterbankConfig, enhance_signal, gtf_f0_config
from .metrics import estoi
from .pitch import F0SearchRange
from .signal_core import AudioSignal, MixSpec, frame_signal, mix_at_snr, read_wav, \
    resample, write_wav
from .synth import FrameLabels, make_noise, read_labels, synth_vowel, write_labels

METHODS = ("unprocessed", "gtf_f0", "hdag")
BUILTIN_NOISES = ("white", "ssn")


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures on exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _f(value, digits=6):
    """Fixed-width float field; empty for missing values."""
    if value is None:
        return ""
    return f"{value:.{digits}f}"


def _cell_seed(*entropy) -> int:
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def _effective_config_header(cfg: PipelineConfig, extra: list[str]) -> list[str]:
    lines = [f"# {line}" for line in extra]
    lines += [f"# cfg {line}" for line in config_lines(cfg)]
    return lines


def _run_method(mix: AudioSignal, method: str, cfg: PipelineConfig, seed: int,
                voiced_mask=None):
    """Apply one processing method to a mixture."""
    if method == "unprocessed":
        return mix, None
    if method == "hdag":
        bank = cfg.filterbank_config()
    elif method == "gtf_f0":
        bank = gtf_f0_config()
    else:
        raise UsageError(f"unknown method {method!r} (choose from {', '.join(METHODS)})")
    return enhance_signal(
        mix, bank, frame_ms=cfg.frame_ms, overlap=cfg.overlap,
        search=F0SearchRange(cfg.f_min_hz, cfg.f_max_hz),
        salience_threshold=cfg.salience_threshold, boundary_hz=cfg.boundary_hz,
        ensemble_size=cfg.ensemble_size, noise_std_ratio=cfg.noise_std_ratio,
        sd_threshold=cfg.sd_threshold, max_siftings=cfg.max_siftings,
        voiced_mask=voiced_mask, seed=seed, normalize=cfg.normalize, method=method)


def _write_enhance_report(path, report, cfg, header_extra, frame_times):
    with open(path, "w", newline="") as fh:
        for line in _effective_config_header(cfg, header_extra):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "time_s", "voiced", "f_est_hz", "salience",
                         "pitch_class", "f_bar_hz", "f_adj_hz", "n_filters",
                         "dropped_centers", "fsffe_fallback", "gains"])
        for rec in report.frames:
            writer.writerow([
                rec.frame_index, _f(frame_times[rec.frame_index]),
                int(rec.voiced), _f(rec.f_est_hz), _f(rec.salience),
                rec.frame_class.value if rec.voiced else "",
                _f(rec.f_bar_hz), _f(rec.f_adj_hz),
                rec.n_filters if rec.voiced else "",
                rec.dropped_centers if rec.voiced else "",
                int(rec.fsffe_fallback) if rec.voiced else "",
                "|".join(f"{g:g}" for g in rec.gains)])


def cmd_enhance(args) -> int:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    signal = read_wav(args.input)
    resampled_from = None
    if signal.sample_rate_hz != cfg.sample_rate_hz:
        resampled_from = signal.sample_rate_hz
        signal = resample(signal, cfg.sample_rate_hz)
    voiced_mask = None
    if args.labels:
        labels = read_labels(args.labels)
        voiced_mask = labels.voiced
    out, report = _run_method(signal, args.method, cfg, args.seed, voiced_mask)
    out_path = Path(args.output)
    write_wav(out_path, out)
    report_path = Path(args.report) if args.report else out_path.with_suffix(".report.csv")
    header = [f"hdag enhance report",
              f"input = {args.input}",
              f"output = {out_path}",
              f"method = {args.method}",
              f"seed = {args.seed}"]
    if resampled_from is not None:
        header.append(f"resampled_from_hz = {resampled_from}")
    seq = frame_signal(signal, frame_ms=cfg.frame_ms, overlap=cfg.overlap)
    times = seq.frame_times_s()
    if report is None:
        header.append("normalization_factor = 1.000000")
        with open(report_path, "w") as fh:
            for line in _effective_config_header(cfg, header):
                fh.write(line + "\n")
        print(f"wrote {out_path} (unprocessed passthrough)")
        return 0
    header.append(f"normalization_factor = {report.normalization_factor:.6f}")
    _write_enhance_report(report_path, report, cfg, header, times)
    if not args.no_figures:
        from . import plots
        plots.save_enhance_figure(report_path.with_suffix(".png"), report, times)
    print(f"wrote {out_path} ({report.n_voiced}/{len(report.frames)} voiced frames, "
          f"normalization {report.normalization_factor:.4f})")
    return 0


@dataclasses.dataclass
class Manifest:
    clean_files: list
    noises: list
    snrs: list
    methods: list
    output_dir: Path
    seed: int
    write_wavs: bool
    config: PipelineConfig


def parse_manifest(path) -> Manifest:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        try:
            parser.read_file(fh)
        except configparser.Error as exc:
            raise FormatError(f"{path}: {exc}") from exc
    if not parser.has_section("job"):
        raise UsageError(f"{path}: manifest needs a [job] section")
    job = dict(parser.items("job"))
    known = {"clean_dir", "clean_files", "noise_files", "snr_list_db", "methods",
             "output_dir", "seed", "write_wavs"}
    for key in job:
        if key not in known:
            raise UsageError(f"unknown manifest key {key!r}")
    base = Path(path).resolve().parent

    def _resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    clean_files = []
    if "clean_dir" in job:
        clean_files += sorted(_resolve(job["clean_dir"]).glob("*.wav"))
    if "clean_files" in job:
        clean_files += [_resolve(p.strip()) for p in job["clean_files"].split(",") if p.strip()]
    if not clean_files:
        raise UsageError("manifest lists no clean files")
    noises = [tok.strip() for tok in job.get("noise_files", "").split(",") if tok.strip()]
    if not noises:
        raise UsageError("manifest lists no noises")
    noises = [tok if tok in BUILTIN_NOISES else _resolve(tok) for tok in noises]
    try:
        snrs = [float(tok) for tok in job.get("snr_list_db", "").split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad snr_list_db: {exc}") from exc
    if not snrs:
        raise UsageError("manifest lists no SNRs")
    methods = [tok.strip() for tok in job.get("methods", "").split(",") if tok.strip()]
    if not methods:
        raise UsageError("manifest lists no methods")
    for method in methods:
        if method not in METHODS:
            raise UsageError(f"unknown method {method!r} in manifest")
    seed = int(job.get("seed", "0"))
    write_wavs = job.get("write_wavs", "true").strip().lower() in ("1", "true", "yes", "on")
    output_dir = _resolve(job.get("output_dir", "results"))
    cfg = apply_overrides(PipelineConfig(), parser, skip_sections=("job",))
    return Manifest(clean_files=clean_files, noises=noises, snrs=snrs,
                    methods=methods, output_dir=output_dir, seed=seed,
                    write_wavs=write_wavs, config=cfg)


def _noise_tag(noise) -> str:
    return noise if isinstance(noise, str) else Path(noise).stem


def _snr_tag(snr: float) -> str:
    return f"snr{snr:g}".replace("-", "m").replace(".", "p")


def _load_clean(path, cfg: PipelineConfig):
    signal = read_wav(path)
    if signal.sample_rate_hz != cfg.sample_rate_hz:
        signal = resample(signal, cfg.sample_rate_hz)
    label_path = Path(path).with_suffix(".labels")
    mask = read_labels(label_path).voiced if label_path.exists() else None
    return signal, mask


def run_grid(manifest: Manifest, methods=None, cfg=None, wav_dir=None):
    """Evaluate every (file, noise, snr, method) cell of a manifest.

    Returns rows as dicts; failed cells keep their row with status
    "failed" and the run continues.  Cell seeds depend only on the
    manifest seed and grid coordinates, never on evaluation order.
    """
    methods = manifest.methods if methods is None else methods
    cfg = manifest.config if cfg is None else cfg
    rows = []
    noise_cache = {}
    for fi, clean_path in enumerate(manifest.clean_files):
        clean, voiced_mask = _load_clean(clean_path, cfg)
        for ni, noise_spec in enumerate(manifest.noises):
            if isinstance(noise_spec, str):
                key = (noise_spec, len(clean), fi, ni)
                if key not in noise_cache:
                    noise_cache[key] = make_noise(
                        noise_spec, len(clean), cfg.sample_rate_hz,
                        seed=_cell_seed(manifest.seed, 101, fi, ni))
                noise = noise_cache[key]
            else:
                if noise_spec not in noise_cache:
                    loaded = read_wav(noise_spec)
                    if loaded.sample_rate_hz != cfg.sample_rate_hz:
                        loaded = resample(loaded, cfg.sample_rate_hz)
                    noise_cache[noise_spec] = loaded
                noise = noise_cache[noise_spec]
            for si, snr in enumerate(manifest.snrs):
                mix = mix_at_snr(clean, noise, MixSpec(snr_db=snr))
                for mi, method in enumerate(methods):
                    row = {"file": Path(clean_path).stem, "noise": _noise_tag(noise_spec),
                           "snr_db": snr, "method": method, "estoi": None,
                           "delta_estoi": None, "status": "ok"}
                    try:
                        out, _ = _run_method(mix, method, cfg,
                                             _cell_seed(manifest.seed, fi, ni, si, mi),
                                             voiced_mask)
                        row["estoi"] = estoi(clean, out)
                        if wav_dir is not None:
                            name = (f"{Path(clean_path).stem}__{_noise_tag(noise_spec)}"
                                    f"__{_snr_tag(snr)}__{method}.wav")
                            write_wav(wav_dir / name, out)
                    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                        row["status"] = "failed"
                        print(f"cell failed ({row['file']}, {row['noise']}, "
                              f"{snr:g} dB, {method}): {exc}", file=sys.stderr)
                    rows.append(row)
    return rows


def _attach_deltas(rows):
    baseline = {(r["file"], r["noise"], r["snr_db"]): r["estoi"]
                for r in rows if r["method"] == "unprocessed" and r["status"] == "ok"}
    for r in rows:
        if r["method"] != "unprocessed" and r["status"] == "ok":
            ref = baseline.get((r["file"], r["noise"], r["snr_db"]))
            if ref is not None:
                r["delta_estoi"] = r["estoi"] - ref


def _mean_rows(rows, methods, noises, snrs):
    """Per-noise averages over files, per SNR and overall."""
    out = []
    for noise in noises:
        for method in methods:
            per_snr = []
            for snr in snrs:
                scores = [r["estoi"] for r in rows
                          if r["noise"] == noise and r["method"] == method
                          and r["snr_db"] == snr and r["status"] == "ok"]
                if scores:
                    mean = float(np.mean(scores))
                    per_snr.append(mean)
                    out.append({"file": "__mean__", "noise": noise, "snr_db": snr,
                                "method": method, "estoi": mean,
                                "delta_estoi": None, "status": "mean"})
            if per_snr:
                out.append({"file": "__mean__", "noise": noise, "snr_db": "all",
                            "method": method, "estoi": float(np.mean(per_snr)),
                            "delta_estoi": None, "status": "mean"})
    return out


def _write_scores_csv(path, rows, cfg, header_extra):
    with open(path, "w", newline="") as fh:
        for line in _effective_config_header(cfg, header_extra):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(["file", "noise", "snr_db", "method", "estoi",
                         "delta_estoi", "status"])
        for r in rows:
            snr = r["snr_db"]
            writer.writerow([r["file"], r["noise"],
                             snr if isinstance(snr, str) else f"{snr:g}",
                             r["method"], _f(r["estoi"]), _f(r["delta_estoi"]),
                             r["status"]])


def cmd_evaluate(args) -> int:
    manifest = parse_manifest(args.manifest)
    manifest.output_dir.mkdir(parents=True, exist_ok=True)
    wav_dir = None
    if manifest.write_wavs:
        wav_dir = manifest.output_dir / "wavs"
        wav_dir.mkdir(exist_ok=True)
    rows = run_grid(manifest, wav_dir=wav_dir)
    _attach_deltas(rows)
    noises = [_noise_tag(nz) for nz in manifest.noises]
    means = _mean_rows(rows, manifest.methods, noises, manifest.snrs)
    header = ["hdag evaluation grid",
              f"manifest = {args.manifest}",
              f"seed = {manifest.seed}",
              f"files = {len(manifest.clean_files)}",
              f"methods = {', '.join(manifest.methods)}"]
    csv_path = manifest.output_dir / "scores.csv"
    _write_scores_csv(csv_path, rows + means, manifest.config, header)
    if not args.no_figures:
        from . import plots
        plot_rows = [(r["noise"], r["snr_db"], r["method"], r["estoi"])
                     for r in means if r["snr_db"] != "all"]
        plots.save_grid_figure(manifest.output_dir / "scores.png", plot_rows)
    n_ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"{n_ok}/{len(rows)} cells ok; wrote {csv_path}")
    return 0 if n_ok else 3


def _parse_sweep_values(spec: str):
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise UsageError("range must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step == 0.0:
            raise UsageError("sweep step must be nonzero")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise UsageError("empty sweep range")
        return [start + i * step for i in range(count)]
    values = [float(tok) for tok in spec.split(",") if tok.strip()]
    if not values:
        raise UsageError("no sweep values given")
    return values


def _grid_mean(rows) -> float:
    scores = [r["estoi"] for r in rows if r["status"] == "ok"]
    if not scores:
        raise DegenerateInputError("all grid cells failed")
    return float(np.mean(scores))


def cmd_sweep(args) -> int:
    manifest = parse_manifest(args.manifest)
    manifest.output_dir.mkdir(parents=True, exist_ok=True)
    cfg = manifest.config
    if args.param == "c":
        if args.greedy:
            raise UsageError("--greedy only applies to --param gains")
        values = _parse_sweep_values(args.values or "2:-2:-1")
        detail = []
        means = []
        for c in values:
            rows = run_grid(manifest, methods=["hdag"],
                            cfg=dataclasses.replace(cfg, asymmetry=c))
            for r in rows:
                detail.append({**r, "c": c})
            means.append(_grid_mean(rows))
        csv_path = manifest.output_dir / "sweep_c.csv"
        header = ["hdag asymmetry sweep", f"manifest = {args.manifest}",
                  f"seed = {manifest.seed}",
                  f"values = {', '.join(f'{v:g}' for v in values)}"]
        with open(csv_path, "w", newline="") as fh:
            for line in _effective_config_header(cfg, header):
                fh.write(line + "\n")
            writer = csv.writer(fh)
            writer.writerow(["c", "file", "noise", "snr_db", "estoi", "status"])
            for r in detail:
                writer.writerow([f"{r['c']:g}", r["file"], r["noise"],
                                 f"{r['snr_db']:g}", _f(r["estoi"]), r["status"]])
            writer.writerow([])
            writer.writerow(["c", "mean_estoi"])
            for c, mean in zip(values, means):
                writer.writerow([f"{c:g}", _f(mean)])
        if not args.no_figures:
            from . import plots
            plots.save_param_sweep_figure(manifest.output_dir / "sweep_c.png",
                                          values, means, "asymmetry c")
        best = values[int(np.argmax(means))]
        print(f"best c = {best:g} (mean score {max(means):.6f}); wrote {csv_path}")
        return 0
    if args.param == "gains":
        if not args.greedy:
            raise UsageError("--param gains requires --greedy")
        if args.pitch_class not in ("low", "high"):
            raise UsageError("--pitch-class must be low or high")
        if args.gain_step <= 0.0:
            raise UsageError("--gain-step must be positive")
        candidates = [args.gain_min + i * args.gain_step
                      for i in range(int(np.floor((args.gain_max - args.gain_min)
                                                  / args.gain_step + 1e-9)) + 1)]
        if not candidates:
            raise UsageError("empty gain candidate list")
        n = cfg.num_filters
        working = [1.0] * n
        neutral = tuple([1.0] * n)
        trace = []
        for k in range(n):
            best_gain, best_mean = None, -np.inf
            for g in candidates:
                trial = list(working)
                trial[k] = g
                if args.pitch_class == "low":
                    cfg2 = dataclasses.replace(cfg, gains_low=tuple(trial),
                                               gains_high=neutral)
                else:
                    cfg2 = dataclasses.replace(cfg, gains_low=neutral,
                                               gains_high=tuple(trial))
                mean = _grid_mean(run_grid(manifest, methods=["hdag"], cfg=cfg2))
                trace.append([k, g, mean, False])
                if mean > best_mean:
                    best_gain, best_mean = g, mean
            working[k] = best_gain
            for t in trace:
                if t[0] == k and t[1] == best_gain:
                    t[3] = True
                    break
        csv_path = manifest.output_dir / f"sweep_gains_{args.pitch_class}.csv"
        header = ["hdag greedy gain calibration",
                  f"manifest = {args.manifest}", f"seed = {manifest.seed}",
                  f"pitch_class = {args.pitch_class}",
                  f"final_gains = {', '.join(f'{g:g}' for g in working)}"]
        with open(csv_path, "w", newline="") as fh:
            for line in _effective_config_header(cfg, header):
                fh.write(line + "\n")
            writer = csv.writer(fh)
            writer.writerow(["filter_index", "gain", "mean_estoi", "chosen"])
            for k, g, mean, chosen in trace:
                writer.writerow([k, f"{g:g}", _f(mean), int(chosen)])
        if not args.no_figures:
            from . import plots
            plots.save_greedy_figure(manifest.output_dir /
                                     f"sweep_gains_{args.pitch_class}.png",
                                     [tuple(t) for t in trace], args.pitch_class)
        print(f"calibrated {args.pitch_class}-pitch gains: "
              f"{', '.join(f'{g:g}' for g in working)}; wrote {csv_path}")
        return 0
    raise UsageError(f"unknown sweep parameter {args.param!r}")


def cmd_synth(args) -> int:
    signal, labels = synth_vowel(
        args.f0, args.duration, sample_rate_hz=args.fs, harmonics=args.harmonics,
        rolloff=args.rolloff, vibrato_rate_hz=args.vibrato_rate,
        vibrato_depth=args.vibrato_depth, glide=args.glide,
        gaps=args.gaps, gap_ms=args.gap_ms, phases=args.phases,
        seed=args.seed)
    out_path = Path(args.output)
    write_wav(out_path, signal)
    labels_path = Path(args.labels) if args.labels else out_path.with_suffix(".labels")
    write_labels(labels_path, labels)
    n_voiced = int(labels.voiced.sum())
    print(f"wrote {out_path} ({args.duration:g} s at {args.f0:g} Hz, "
          f"{n_voiced}/{labels.n_frames} voiced frames) and {labels_path}")
    return 0


def cmd_noise(args) -> int:
    if args.duration <= 0:
        raise UsageError(f"duration must be positive, got {args.duration}")
    n = int(round(args.duration * args.fs))
    signal = make_noise(args.kind, n, args.fs, seed=args.seed)
    write_wav(args.output, signal)
    print(f"wrote {args.output} ({args.kind}, {args.duration:g} s)")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="hdag",
                     description="Harmonic-band speech enhancement toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="enhance one WAV file")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--method", choices=METHODS, default="hdag")
    p.add_argument("--config", help="INI config file overriding defaults")
    p.add_argument("--labels", help="voiced/unvoiced sidecar gating analysis")
    p.add_argument("--report", help="report CSV path (default: next to output)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("evaluate", help="run the evaluation grid of a manifest")
    p.add_argument("manifest")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="sweep a design parameter over a manifest")
    p.add_argument("manifest")
    p.add_argument("--param", required=True, choices=("c", "gains"))
    p.add_argument("--values", help="comma list or start:stop:step (for --param c)")
    p.add_argument("--greedy", action="store_true",
                   help="sequential per-filter gain calibration")
    p.add_argument("--pitch-class", choices=("low", "high"), default="low")
    p.add_argument("--gain-min", type=float, default=1.0)
    p.add_argument("--gain-max", type=float, default=14.0)
    p.add_argument("--gain-step", type=float, default=0.5)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="synthesize a labeled harmonic test vowel")
    p.add_argument("--f0", type=float, required=True)
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--harmonics", type=int, default=8)
    p.add_argument("--rolloff", type=float, default=1.0,
                   help="harmonic h gets amplitude h**-rolloff")
    p.add_argument("--vibrato-rate", type=float, default=5.0)
    p.add_argument("--vibrato-depth", type=float, default=0.0)
    p.add_argument("--glide", type=float, default=0.0,
                   help="total fractional F0 rise across the signal")
    p.add_argument("--phases", choices=("aligned", "random"), default="aligned",
                   help="harmonic initial phases: pulse-like or seeded random")
    p.add_argument("--gaps", type=int, default=1, help="unvoiced gaps")
    p.add_argument("--gap-ms", type=float, default=120.0)
    p.add_argument("--fs", type=int, default=16000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--labels", help="label sidecar path (default: next to output)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("noise", help="generate bundled noise")
    p.add_argument("--kind", choices=BUILTIN_NOISES, required=True)
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--fs", type=int, default=16000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_noise)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hdag: {exc}", file=sys.stderr)
        return 1
    except FormatError as exc:
        print(f"hdag: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"hdag: {exc}", file=sys.stderr)
        return 2
    except (DegenerateInputError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"hdag: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"hdag: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

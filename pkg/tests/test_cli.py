"""Command-line entry points: synthesis, enhancement, evaluation, sweeps."""

import csv
from pathlib import Path

import numpy as np
import pytest

from hdag.cli import main
from hdag.signal_core import read_wav
from hdag.synth import read_labels

FAST_EMD = "[emd]\nensemble_size = 4\nmax_siftings = 6\n"


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _synth(tmp_path: Path, name="vowel.wav", f0=150.0, duration=0.45,
           extra=()) -> Path:
    wav = tmp_path / name
    rc = main(["synth", "--f0", str(f0), "--duration", str(duration),
               "--harmonics", "5", "--rolloff", "0", "-o", str(wav), *extra])
    assert rc == 0
    return wav


def test_synth_writes_wav_and_labels(tmp_path):
    wav = _synth(tmp_path)
    assert wav.exists()
    labels = read_labels(wav.with_suffix(".labels"))
    assert labels.voiced.any()
    sig = read_wav(wav)
    assert sig.sample_rate_hz == 16000
    assert sig.samples.size == 7200


def test_enhance_unprocessed_passes_audio_through(tmp_path):
    wav = _synth(tmp_path)
    out = tmp_path / "out.wav"
    rc = main(["enhance", str(wav), "-o", str(out), "--method", "unprocessed"])
    assert rc == 0
    back = read_wav(out)
    original = read_wav(wav)
    assert np.max(np.abs(back.samples - original.samples)) <= 2.0 / 32768.0
    assert out.with_suffix(".report.csv").exists(), "report file missing"


UNITY_GAINS = ",".join(["1"] * 10)


def test_enhance_unity_config_keeps_audio_and_reports_unit_gains(tmp_path):
    wav = _synth(tmp_path)
    cfg = _write(tmp_path / "unity.ini",
                 FAST_EMD + "[filterbank]\n"
                 f"gains_low = {UNITY_GAINS}\n"
                 f"gains_high = {UNITY_GAINS}\n")
    out = tmp_path / "unity.wav"
    rc = main(["enhance", str(wav), "-o", str(out), "--method", "hdag",
               "--config", str(cfg)])
    assert rc == 0
    back = read_wav(out)
    original = read_wav(wav)
    assert np.max(np.abs(back.samples - original.samples)) <= 3.0 / 32768.0

    report = out.with_suffix(".report.csv")
    figure = report.with_suffix(".png")
    assert report.exists(), "report CSV missing"
    assert figure.exists(), "figure PNG missing next to the report"
    with open(report) as fh:
        rows = list(csv.DictReader(r for r in fh if not r.startswith("#")))
    assert rows
    assert {"frame_index", "voiced", "f_est_hz", "pitch_class",
            "n_filters", "gains"} <= set(rows[0])
    voiced = [r for r in rows if r["voiced"] == "1"]
    assert voiced
    for row in voiced:
        assert set(row["gains"].split("|")) == {"1"}, row["gains"]


def test_enhance_no_figures_flag(tmp_path):
    wav = _synth(tmp_path)
    out = tmp_path / "out.wav"
    rc = main(["enhance", str(wav), "-o", str(out), "--method", "unprocessed",
               "--no-figures"])
    assert rc == 0
    assert out.with_suffix(".report.csv").exists()
    assert not out.with_suffix(".report.png").exists()


def test_enhance_hdag_uses_labels_and_config(tmp_path):
    wav = _synth(tmp_path)
    cfg = _write(tmp_path / "fast.ini", FAST_EMD)
    out = tmp_path / "enh.wav"
    rc = main(["enhance", str(wav), "-o", str(out), "--method", "hdag",
               "--config", str(cfg)])
    assert rc == 0
    with open(out.with_suffix(".report.csv")) as fh:
        rows = list(csv.DictReader(r for r in fh if not r.startswith("#")))
    voiced = [r for r in rows if r["voiced"] == "1"]
    assert voiced, "no voiced frames reported"
    assert all(1 <= int(r["n_filters"]) <= 10 for r in voiced)
    assert all(r["pitch_class"] in ("low", "high") for r in voiced)


def test_enhance_gtf_reports_four_filters(tmp_path):
    wav = _synth(tmp_path)
    cfg = _write(tmp_path / "fast.ini", FAST_EMD)
    out = tmp_path / "gtf.wav"
    rc = main(["enhance", str(wav), "-o", str(out), "--method", "gtf_f0",
               "--config", str(cfg)])
    assert rc == 0
    with open(out.with_suffix(".report.csv")) as fh:
        rows = list(csv.DictReader(r for r in fh if not r.startswith("#")))
    voiced = [r for r in rows if r["voiced"] == "1"]
    assert voiced
    assert all(int(r["n_filters"]) == 4 for r in voiced)


def test_enhance_missing_input_is_io_error(tmp_path):
    rc = main(["enhance", str(tmp_path / "absent.wav"),
               "-o", str(tmp_path / "x.wav")])
    assert rc == 2


def _manifest(tmp_path: Path, wav: Path, seed=3) -> Path:
    return _write(tmp_path / "grid.ini", (
        "[job]\n"
        f"clean_files = {wav.name}\n"
        "noise_files = white\n"
        "snr_list_db = 0\n"
        "methods = unprocessed,hdag\n"
        "output_dir = results\n"
        f"seed = {seed}\n"
        "write_wavs = true\n\n" + FAST_EMD))


def test_evaluate_grid_outputs(tmp_path):
    wav = _synth(tmp_path, duration=0.7)
    manifest = _manifest(tmp_path, wav)
    rc = main(["evaluate", str(manifest)])
    assert rc == 0
    scores = tmp_path / "results" / "scores.csv"
    assert scores.exists()
    assert (tmp_path / "results" / "scores.png").exists(), \
        "grid figure missing next to scores.csv"
    with open(scores) as fh:
        rows = list(csv.DictReader(r for r in fh if not r.startswith("#")))
    cell_rows = [r for r in rows if r["file"] != "__mean__"]
    mean_rows = [r for r in rows if r["file"] == "__mean__"]
    assert len(cell_rows) == 2  # one file x one noise x one snr x two methods
    assert mean_rows, "summary rows missing"
    assert all(r["status"] == "ok" for r in cell_rows)
    unp = next(r for r in cell_rows if r["method"] == "unprocessed")
    hdag_row = next(r for r in cell_rows if r["method"] == "hdag")
    assert hdag_row["delta_estoi"]
    delta = float(hdag_row["delta_estoi"])
    assert delta == pytest.approx(float(hdag_row["estoi"]) - float(unp["estoi"]),
                                  abs=2e-6)
    wavs = list((tmp_path / "results" / "wavs").glob("*.wav"))
    assert wavs, "write_wavs did not produce any WAV files"


def test_evaluate_is_deterministic(tmp_path):
    wav = _synth(tmp_path, duration=0.7)
    first = _manifest(tmp_path, wav)
    rc1 = main(["evaluate", str(first), "--no-figures"])
    csv1 = (tmp_path / "results" / "scores.csv").read_bytes()
    (tmp_path / "results" / "scores.csv").unlink()
    rc2 = main(["evaluate", str(first), "--no-figures"])
    csv2 = (tmp_path / "results" / "scores.csv").read_bytes()
    assert rc1 == rc2 == 0
    assert csv1 == csv2


def test_evaluate_rejects_bad_manifest(tmp_path):
    empty = _write(tmp_path / "empty.ini", "[irrelevant]\nkey = 1\n")
    assert main(["evaluate", str(empty)]) == 1
    missing_clean = _write(tmp_path / "noclean.ini",
                           "[job]\nnoise_files = white\nsnr_list_db = 0\n"
                           "methods = hdag\n")
    assert main(["evaluate", str(missing_clean)]) == 1
    assert main(["evaluate", str(tmp_path / "missing.ini")]) == 2


def test_sweep_rejects_zero_step(tmp_path):
    wav = _synth(tmp_path)
    manifest = _manifest(tmp_path, wav)
    rc = main(["sweep", str(manifest), "--param", "c", "--values=-2:2:0"])
    assert rc == 1


def test_sweep_c_writes_table(tmp_path):
    wav = _synth(tmp_path, duration=0.7)
    manifest = _manifest(tmp_path, wav)
    rc = main(["sweep", str(manifest), "--param", "c",
               "--values=-1,0", "--no-figures"])
    assert rc == 0
    table = tmp_path / "results" / "sweep_c.csv"
    assert table.exists()
    text = [l for l in table.read_text().splitlines() if not l.startswith("#")]
    split = text.index("")
    cells = list(csv.DictReader(text[:split]))
    summary = list(csv.DictReader(text[split + 1:]))
    assert {float(r["c"]) for r in cells} == {-1.0, 0.0}
    assert all(r["status"] == "ok" for r in cells)
    assert {float(r["c"]) for r in summary} == {-1.0, 0.0}
    assert all(r["mean_estoi"] for r in summary)


def test_noise_command(tmp_path):
    out = tmp_path / "n.wav"
    rc = main(["noise", "--kind", "white", "--duration", "0.25", "-o", str(out)])
    assert rc == 0
    sig = read_wav(out)
    assert sig.samples.size == 4000

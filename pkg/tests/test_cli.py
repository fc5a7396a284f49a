import json

import numpy as np
import pytest

from phonoface import cli
from phonoface.anthropometry import read_am_csv
from phonoface.dsp import AudioClip
from phonoface.segments import parse_alignment_file
from phonoface.stats import read_marginals_csv, read_results_csv

from oracles import wav_bytes

SYNTH_SPEC = {
    "n_subjects": 40,
    "clips_per_phoneme_per_subject": 3,
    "phoneme_labels": ["iː", "b"],
    "am_names": ["31-37", "2-7"],
    "planted": [{"phoneme": "iː", "am": "31-37", "beta": 1.0}],
    "noise_std": 0.3,
    "seed": 0,
    "n_mels": 16,
    "target_frames": 8,
    "block_width": 4,
}

RUN_CONFIG = {
    "split": {"sample_cap": 5000, "n_repeats": 2, "alpha": 0.05, "base_seed": 0},
    "regressor": {"architecture": "linear", "max_epochs": 5},
    "pairs": {},
}


def write_json(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# usage-level behavior

def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
    assert "extract-mel" in capsys.readouterr().out


def test_version_prints_tag(capsys):
    assert cli.main(["--version"]) == 0
    out = capsys.readouterr().out
    assert "phonoface" in out and "0.1.0" in out


def test_missing_required_flag_is_usage_error(capsys):
    assert cli.main(["run", "--out", "x"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert cli.main(["report", "--results", "x", "--bogus"]) == 1


def test_no_subcommand_is_usage_error():
    assert cli.main([]) == 1


def test_missing_config_file_is_data_error(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2


def test_subcommand_help_exits_zero():
    assert cli.main(["synth", "--help"]) == 0


# ---------------------------------------------------------------------------
# synth -> run -> report flow

def test_synth_run_report_flow(tmp_path, capsys):
    spec_path = write_json(tmp_path / "spec.json", SYNTH_SPEC)
    data_dir = tmp_path / "data"
    assert cli.main(["synth", "--spec", str(spec_path), "--out", str(data_dir)]) == 0
    assert (data_dir / "clips.tsv").exists()
    assert (data_dir / "ams.csv").exists()
    assert (data_dir / "ground_truth.json").exists()

    config = dict(RUN_CONFIG)
    config["dataset"] = str(data_dir)
    cfg_path = write_json(tmp_path / "run.json", config)
    out_dir = tmp_path / "results"
    assert cli.main(["run", "--config", str(cfg_path), "--out", str(out_dir)]) == 0

    results = read_results_csv(out_dir / "results.csv")
    assert len(results) == 4  # 2 phonemes x 2 measurements
    marginals = read_marginals_csv(out_dir / "marginals.csv")
    assert {m["kind"] for m in marginals} == {"phoneme", "am"}
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["errors"] == {}
    assert len(manifest["pairs"]) == 4

    capsys.readouterr()
    assert cli.main(["report", "--results", str(out_dir), "--top", "3"]) == 0
    out = capsys.readouterr().out
    assert "phonemes by mean score" in out
    assert "pairs predictable" in out


def test_run_data_flag_overrides_config(tmp_path):
    spec_path = write_json(tmp_path / "spec.json", SYNTH_SPEC)
    data_dir = tmp_path / "data"
    assert cli.main(["synth", "--spec", str(spec_path), "--out", str(data_dir)]) == 0
    cfg_path = write_json(tmp_path / "run.json", RUN_CONFIG)  # no dataset key
    out_dir = tmp_path / "res"
    assert cli.main(["run", "--config", str(cfg_path), "--out", str(out_dir)]) == 1
    assert (
        cli.main(
            ["run", "--config", str(cfg_path), "--out", str(out_dir), "--data", str(data_dir)]
        )
        == 0
    )


def test_run_identical_invocations_are_byte_identical(tmp_path):
    spec_path = write_json(tmp_path / "spec.json", SYNTH_SPEC)
    data_dir = tmp_path / "data"
    cli.main(["synth", "--spec", str(spec_path), "--out", str(data_dir)])
    config = dict(RUN_CONFIG)
    config["dataset"] = str(data_dir)
    cfg_path = write_json(tmp_path / "run.json", config)
    outs = []
    for name in ("r1", "r2"):
        out_dir = tmp_path / name
        assert cli.main(["run", "--config", str(cfg_path), "--out", str(out_dir)]) == 0
        outs.append(
            (out_dir / "results.csv").read_bytes()
            + (out_dir / "marginals.csv").read_bytes()
        )
    assert outs[0] == outs[1]


# ---------------------------------------------------------------------------
# data-prep subcommands

def test_inventory_prints_counts(tmp_path, capsys):
    align = tmp_path / "a.tsv"
    align.write_text(
        "u1\ts1\tiː\t0.0\t0.1\nu1\ts1\tiː\t0.2\t0.3\nu1\ts1\tb\t0.4\t0.5\n",
        encoding="utf-8",
    )
    assert cli.main(["inventory", "--align", str(align), "--min-count", "2"]) == 0
    out = capsys.readouterr().out
    assert "iː" in out and "yes" in out and "no" in out


def test_extract_mel_builds_cache(tmp_path):
    rng = np.random.default_rng(0)
    audio_dir = tmp_path / "audio"
    audio_dir.mkdir()
    samples = (rng.uniform(-0.3, 0.3, size=16000) * 32767).astype("<i2")
    (audio_dir / "u1.wav").write_bytes(wav_bytes(samples.tobytes(), 1, 16000, 16))
    align = tmp_path / "a.tsv"
    align.write_text(
        # second interval is too short for one analysis window and is skipped
        "u1\ts1\tiː\t0.05\t0.40\nu1\ts1\tb\t0.50\t0.51\nu1\ts1\tæ\t0.60\t0.90\n",
        encoding="utf-8",
    )
    cache = tmp_path / "cache"
    assert (
        cli.main(
            ["extract-mel", "--audio-dir", str(audio_dir), "--align", str(align),
             "--out-cache", str(cache), "--n-mels", "16", "--target-frames", "8"]
        )
        == 0
    )
    rows = (cache / "clips.tsv").read_text().splitlines()
    assert rows[0] == "clip_id\tphoneme\tsubject_id\tmel_path"
    assert len(rows) == 3  # header + two surviving clips
    from phonoface.dsp import load_mel

    first = rows[1].split("\t")
    spec = load_mel(cache / first[3])
    assert spec.bins.shape == (16, 8)


def test_compute_am_normalizes_cohort(tmp_path):
    rng = np.random.default_rng(1)
    lm_dir = tmp_path / "landmarks"
    lm_dir.mkdir()
    from phonoface.anthropometry import load_am_definitions, required_indices

    needed = sorted(required_indices(load_am_definitions()))
    for s in range(3):
        rows = [f"{i},{x},{y},{z}" for i in needed
                for x, y, z in [rng.normal(scale=40, size=3)]]
        (lm_dir / f"subj{s}.csv").write_text("\n".join(rows) + "\n")
    out = tmp_path / "ams.csv"
    assert cli.main(["compute-am", "--landmarks-dir", str(lm_dir), "--out", str(out)]) == 0
    cohort = read_am_csv(out)
    assert len(cohort) == 3
    mat = np.stack([v.as_array() for v in cohort])
    assert np.max(np.abs(mat.mean(axis=0))) < 1e-9
    assert (tmp_path / "ams.stats.json").exists()


def test_extract_mel_output_feeds_primary_parser(tmp_path):
    # the alignment contract used by extract-mel is the same TSV the
    # segmentation adapter emits
    align = tmp_path / "a.tsv"
    align.write_text("u1\ts1\tiː\t0.0\t0.2\n", encoding="utf-8")
    alignments = parse_alignment_file(align)
    assert alignments[0].entries[0].label == "iː"


def test_audio_clip_helper():
    clip = AudioClip(samples=np.zeros(100) + 0.1, sample_rate=100)
    assert clip.duration == 1.0

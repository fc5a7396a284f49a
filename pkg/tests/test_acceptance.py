"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Quantitative checks run against synthetic data and independent brute-force
oracles; every tolerance is pinned here. Run with ``pytest -s`` to see the
per-criterion lines while passing.
"""

import json
import math
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats as spstats

from phonoface import anthropometry as anth
from phonoface import dsp, experiment, stats, synthgen
from phonoface import estimator as est

from oracles import (
    finite_difference_grads,
    max_relative_grad_error,
    naive_angle,
    naive_distance,
    naive_log_mel,
    naive_proportion,
    random_rigid_transform,
)


def report(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# criterion: anthropometric math against brute-force arithmetic

def test_am_math_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(100)
    ok = True
    for _ in range(100):
        pts = rng.normal(scale=45.0, size=(5, 3))
        a, b, c, d, v = pts
        ok &= abs(anth.distance(a, b) - naive_distance(a, b)) < 1e-12
        ok &= abs(anth.proportion(a, b, c, d) - naive_proportion(a, b, c, d)) < 1e-12
        ok &= abs(anth.angle(a, v, b) - naive_angle(a, v, b)) < 1e-12

        rot, shift = random_rigid_transform(rng)
        ta, tb, tc, td, tv = (rot @ p + shift for p in pts)
        ok &= abs(anth.distance(ta, tb) - anth.distance(a, b)) < 1e-9
        ok &= abs(anth.proportion(ta, tb, tc, td) - anth.proportion(a, b, c, d)) < 1e-9
        ok &= abs(anth.angle(ta, tv, tb) - anth.angle(a, v, b)) < 1e-9

        s = float(rng.uniform(0.1, 10.0))
        ok &= abs(anth.proportion(a * s, b * s, c * s, d * s) - anth.proportion(a, b, c, d)) < 1e-9
        ok &= abs(anth.angle(a * s, v * s, b * s) - anth.angle(a, v, b)) < 1e-9
    elapsed = time.perf_counter() - started
    ok &= elapsed < 1.0
    report("AM math oracle", ok, f"{elapsed:.2f}s")


# ---------------------------------------------------------------------------
# criterion: spectrogram extraction against a naive DFT reference

def test_dsp_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(101)
    cfg = dsp.MelConfig()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(900, 2400))
        samples = rng.uniform(-0.9, 0.9, size=n)
        clip = dsp.AudioClip(samples=samples, sample_rate=16000)
        fast = dsp.log_mel(clip, cfg).bins
        slow = naive_log_mel(samples, 16000)
        worst = max(worst, float(np.max(np.abs(fast - slow))))
    ok = worst < 1e-6

    t = np.arange(16000) / 16000.0
    sine = dsp.AudioClip(samples=0.9 * np.sin(2 * np.pi * 1000.0 * t), sample_rate=16000)
    spec = dsp.log_mel(sine, cfg)
    centers = dsp.mel_filter_centers(cfg)
    ok &= int(np.argmax(spec.bins.mean(axis=1))) == int(np.argmin(np.abs(centers - 1000.0)))

    for n, window, hop in [(400, 400, 160), (16000, 400, 160), (12345, 400, 160), (999, 500, 100)]:
        ok &= dsp.frame_count(n, window, hop) == 1 + (n - window) // hop
    elapsed = time.perf_counter() - started
    ok &= elapsed < 30.0
    report("DSP oracle", ok, f"max |diff| {worst:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# criterion: backprop against central finite differences

def test_gradient_check():
    started = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    for arch, kw in (("linear", {}), ("small_conv", {"conv_channels": (2, 3)})):
        cfg = est.RegressorConfig(architecture=arch, seed=3, **kw)
        X = rng.normal(size=(4, 8, 6))
        y = rng.normal(size=4)
        params = est.init_params(cfg, (8, 6))
        _, analytic = est.loss_and_grad(params, X, y)
        numeric = finite_difference_grads(
            lambda p: est.loss_and_grad(p, X, y)[0], params, h=1e-4
        )
        worst = max(worst, max_relative_grad_error(analytic, numeric))
    elapsed = time.perf_counter() - started
    ok = worst < 1e-4 and elapsed < 30.0
    report("Gradient check", ok, f"max rel err {worst:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# criterion: exactness of the test statistics

def test_statistics_exactness():
    started = time.perf_counter()
    ok = abs(stats.t_critical(0.05, 9) - 1.8331) < 1e-3

    lower, upper = stats.ci_bounds([0.9, 1.1], 0.05)
    t1 = math.tan(0.45 * math.pi)
    ok &= abs(upper - (1.0 + t1 * math.sqrt(0.02) / math.sqrt(2))) < 1e-9
    ok &= abs(lower - (1.0 - t1 * math.sqrt(0.02) / math.sqrt(2))) < 1e-9

    rng = np.random.default_rng(103)
    for _ in range(25):
        ratios = rng.normal(1.0, 0.15, size=10)
        ref_half = spstats.t.ppf(0.95, 9) * ratios.std(ddof=1) / math.sqrt(10)
        lo, hi = stats.ci_bounds(ratios, 0.05)
        ok &= abs(lo - (ratios.mean() - ref_half)) < 1e-9
        ok &= abs(hi - (ratios.mean() + ref_half)) < 1e-9

    lo, hi = stats.ci_bounds([0.8] * 10, 0.05)
    ok &= lo == hi == pytest.approx(0.8)

    boundary = stats.decide_pair(
        [stats.RepeatResult(i, 1.0, 1.0) for i in range(10)], 0.05
    )
    ok &= boundary.predictable is False and boundary.score == pytest.approx(0.0)
    elapsed = time.perf_counter() - started
    ok &= elapsed < 1.0
    report("Statistics exactness", ok, f"{elapsed:.2f}s")


# ---------------------------------------------------------------------------
# criterion: null calibration of the decision rule

def test_null_calibration():
    started = time.perf_counter()
    rng = np.random.default_rng(104)
    n_pairs, n, alpha = 2000, 10, 0.05
    rejections = 0
    for _ in range(n_pairs):
        ratios = rng.normal(1.0, 0.1, size=n)
        _, upper = stats.ci_bounds(ratios, alpha)
        rejections += upper < 1.0
    rate = rejections / n_pairs
    elapsed = time.perf_counter() - started
    ok = rate <= alpha + 0.012 and elapsed < 10.0
    report("Null calibration", ok, f"rejection rate {rate:.4f}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# criterion: detection power and effect-strength ranking on planted data

POWER_CFG = est.RegressorConfig(
    architecture="linear", learning_rate=1e-4, batch_size=128, max_epochs=30
)


def _power_run(beta: float, seed: int) -> stats.PairTestResult:
    spec = synthgen.SyntheticSpec(
        n_subjects=100,
        clips_per_phoneme_per_subject=5,  # 500 samples per pair
        phoneme_labels=("iː",),
        am_names=("31-37",),
        planted={("iː", "31-37"): beta} if beta > 0 else {},
        noise_std=0.3,
        seed=seed,
    )
    dataset, _ = synthgen.generate(spec)
    split = experiment.SplitSpec(
        sample_cap=5000, fractions=(0.7, 0.1, 0.2), n_repeats=10,
        alpha=0.05, base_seed=seed,
    )
    return experiment.run_pair(dataset, "iː", "31-37", split, POWER_CFG)


def test_planted_correlation_power():
    started = time.perf_counter()
    planted = [_power_run(1.0, seed) for seed in range(10)]
    hits = sum(r.predictable for r in planted)

    nulls = [_power_run(0.0, seed) for seed in range(20)]
    false_positives = sum(r.predictable for r in nulls)

    mean_scores = {
        0.0: float(np.mean([r.score for r in nulls[:5]])),
        0.3: float(np.mean([_power_run(0.3, seed).score for seed in range(5)])),
        0.6: float(np.mean([_power_run(0.6, seed).score for seed in range(5)])),
        1.0: float(np.mean([r.score for r in planted[:5]])),
    }
    ordered = [mean_scores[b] for b in (0.0, 0.3, 0.6, 1.0)]
    strictly_ranked = all(a < b for a, b in zip(ordered, ordered[1:]))

    elapsed = time.perf_counter() - started
    ok = hits >= 9 and (20 - false_positives) >= 18 and strictly_ranked and elapsed < 900.0
    report(
        "Planted-correlation power",
        ok,
        f"beta=1 hits {hits}/10, null FPs {false_positives}/20, "
        f"scores {['%.3f' % s for s in ordered]}, {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# criterion: determinism and order independence

def test_determinism_and_order_independence(tmp_path):
    started = time.perf_counter()
    spec = synthgen.SyntheticSpec(
        n_subjects=40,
        clips_per_phoneme_per_subject=3,
        phoneme_labels=("iː", "b"),
        am_names=("31-37", "2-7"),
        planted={("iː", "31-37"): 1.0},
        noise_std=0.3,
        seed=11,
        n_mels=16,
        target_frames=8,
        block_width=4,
    )
    dataset, _ = synthgen.generate(spec)
    split = experiment.SplitSpec(n_repeats=3, base_seed=7)
    cfg = replace(POWER_CFG, max_epochs=5)

    payloads = []
    for workers in (1, 1, 8):
        matrix, _ = experiment.run_matrix(dataset, split, cfg, workers=workers)
        results_path = tmp_path / f"res_{len(payloads)}.csv"
        marginals_path = tmp_path / f"marg_{len(payloads)}.csv"
        stats.write_results_csv(results_path, matrix.grid.values())
        stats.write_marginals_csv(marginals_path, matrix)
        payloads.append(results_path.read_bytes() + marginals_path.read_bytes())
    elapsed = time.perf_counter() - started
    ok = payloads[0] == payloads[1] == payloads[2] and elapsed < 300.0
    report("Determinism & order-independence", ok, f"{elapsed:.1f}s")


# ---------------------------------------------------------------------------
# criterion: end-to-end smoke through the installed CLI

def test_end_to_end_smoke(tmp_path):
    spec_payload = {
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
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec_payload), encoding="utf-8")
    data_dir = tmp_path / "data"
    run_cfg = {
        "dataset": str(data_dir),
        "split": {"n_repeats": 2, "base_seed": 0},
        "regressor": {"architecture": "linear", "max_epochs": 5},
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(run_cfg), encoding="utf-8")
    out_dir = tmp_path / "results"

    def invoke(*args):
        return subprocess.run(
            [sys.executable, "-m", "phonoface", *args],
            capture_output=True, text=True, timeout=300,
        )

    synth = invoke("synth", "--spec", str(spec_path), "--out", str(data_dir))
    run = invoke("run", "--config", str(cfg_path), "--out", str(out_dir))
    rep = invoke("report", "--results", str(out_dir))

    ok = synth.returncode == 0 and run.returncode == 0 and rep.returncode == 0
    if ok:
        rows = stats.read_results_csv(out_dir / "results.csv")
        marginals = stats.read_marginals_csv(out_dir / "marginals.csv")
        ok &= len(rows) == 4 and all(r["n_repeats"] == 2 for r in rows)
        ok &= {m["kind"] for m in marginals} == {"phoneme", "am"}
        ok &= "pairs predictable" in rep.stdout
    report(
        "End-to-end smoke",
        ok,
        f"exits synth={synth.returncode} run={run.returncode} report={rep.returncode}",
    )

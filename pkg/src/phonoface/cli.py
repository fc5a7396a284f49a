"""Command-line entry point for the pipeline stages.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime/divergence
error. Diagnostics go to stderr; machine-readable outputs go to files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .anthropometry import (
    compute_am_vector,
    load_am_definitions,
    normalize_ams,
    parse_landmarks,
    required_indices,
    write_am_csv,
)
from .dsp import MelConfig, fix_length, load_wav, log_mel, resample, save_mel
from .errors import (
    ClipTooShortError,
    DivergenceError,
    PhonofaceError,
    RunError,
)
from .estimator import RegressorConfig
from .experiment import SplitSpec, load_dataset, run_matrix, save_dataset
from .segments import build_inventory, parse_alignment_file, slice_clip
from .stats import read_marginals_csv, read_results_csv, write_marginals_csv, write_results_csv
from .synthgen import generate, spec_from_dict

log = logging.getLogger("phonoface")

CANONICAL_SAMPLE_RATE = 16000


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phonoface", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"phonoface {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-mel", help="slice aligned audio into cached spectrograms")
    p.add_argument("--audio-dir", required=True, help="directory of <utterance_id>.wav files")
    p.add_argument("--align", required=True, help="alignment TSV")
    p.add_argument("--out-cache", required=True, help="output dataset directory")
    p.add_argument("--n-mels", type=int, default=64)
    p.add_argument("--target-frames", type=int, default=32)

    p = sub.add_parser("compute-am", help="compute and normalize facial measurements")
    p.add_argument("--landmarks-dir", required=True, help="directory of <subject_id>.csv files")
    p.add_argument("--ams", default=None, help="measurement definitions JSON (default: shipped)")
    p.add_argument("--out", required=True, help="output measurement CSV")

    p = sub.add_parser("inventory", help="phoneme counts and frequency filtering")
    p.add_argument("--align", required=True, help="alignment TSV")
    p.add_argument("--min-count", type=int, default=5000)

    p = sub.add_parser("synth", help="generate a synthetic dataset with planted effects")
    p.add_argument("--spec", required=True, help="synthetic spec JSON")
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("run", help="run the full pair grid")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--data", default=None, help="dataset root (overrides config)")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("report", help="print ranked marginals from a results directory")
    p.add_argument("--results", required=True, help="directory holding the run outputs")
    p.add_argument("--top", type=int, default=None, help="show only the top K rows per table")
    return parser


def cmd_extract_mel(args) -> int:
    cfg = MelConfig(n_mels=args.n_mels, target_frames=args.target_frames)
    alignments = parse_alignment_file(args.align)
    out = Path(args.out_cache)
    (out / "mels").mkdir(parents=True, exist_ok=True)
    rows = []
    counter = 0
    skipped = 0
    for alignment in alignments:
        wav_path = Path(args.audio_dir) / f"{alignment.utterance_id}.wav"
        clip = resample(load_wav(wav_path), CANONICAL_SAMPLE_RATE)
        for interval in alignment.entries:
            try:
                piece = slice_clip(clip, interval.start, min(interval.end, clip.duration))
                spec = fix_length(log_mel(piece, cfg), cfg.target_frames)
            except (ClipTooShortError, ValueError) as exc:
                skipped += 1
                log.warning(
                    "skipping %s %r [%0.3f, %0.3f]: %s",
                    alignment.utterance_id, interval.label, interval.start, interval.end, exc,
                )
                continue
            clip_id = f"c{counter:06d}"
            counter += 1
            rel = f"mels/{clip_id}.pfms"
            save_mel(out / rel, spec)
            rows.append((clip_id, interval.label, alignment.subject_id, rel))
    with open(out / "clips.tsv", "w", encoding="utf-8", newline="") as handle:
        handle.write("clip_id\tphoneme\tsubject_id\tmel_path\n")
        for row in rows:
            handle.write("\t".join(row) + "\n")
    log.info("cached %d clips (%d skipped) under %s", len(rows), skipped, out)
    return 0


def cmd_compute_am(args) -> int:
    defs = load_am_definitions(args.ams)
    needed = required_indices(defs)
    files = sorted(Path(args.landmarks_dir).glob("*.csv"))
    if not files:
        raise PhonofaceError(f"no landmark CSV files under {args.landmarks_dir}")
    cohort = [compute_am_vector(parse_landmarks(f, required=needed), defs) for f in files]
    normalized, scaler = normalize_ams(cohort)
    write_am_csv(args.out, normalized)
    stats_path = Path(args.out).with_suffix(".stats.json")
    stats_path.write_text(
        json.dumps(
            {
                "names": list(cohort[0].names),
                "mean": list(scaler.mean_),
                "std": list(scaler.scale_),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    log.info("wrote %d subjects x %d measurements to %s", len(cohort), len(defs), args.out)
    return 0


def cmd_inventory(args) -> int:
    alignments = parse_alignment_file(args.align)
    inventory = build_inventory(alignments, min_count=args.min_count)
    ordered = sorted(inventory.counts.items(), key=lambda kv: (-kv[1], kv[0]))
    print(f"{'label':<12}{'count':>8}  retained")
    for label, count in ordered:
        print(f"{label:<12}{count:>8}  {'yes' if label in inventory.retained else 'no'}")
    print(f"total {inventory.total} instances, {len(inventory.retained)} labels retained "
          f"(min_count={inventory.min_count})")
    return 0


def cmd_synth(args) -> int:
    payload = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    spec = spec_from_dict(payload)
    dataset, ground_truth = generate(spec)
    save_dataset(args.out, dataset, ground_truth)
    log.info("wrote synthetic dataset to %s", args.out)
    return 0


def load_run_config(path) -> tuple[str | None, SplitSpec, RegressorConfig, dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    split = SplitSpec(**payload.get("split", {}))
    reg_payload = dict(payload.get("regressor", {}))
    if "conv_channels" in reg_payload:
        reg_payload["conv_channels"] = tuple(reg_payload["conv_channels"])
    regressor = RegressorConfig(**reg_payload)
    pairs = payload.get("pairs", {})
    return payload.get("dataset"), split, regressor, pairs


def cmd_run(args) -> int:
    data_root, split, regressor, pairs = load_run_config(args.config)
    if args.data is not None:
        data_root = args.data
    if data_root is None:
        raise _UsageError("no dataset root: set \"dataset\" in the config or pass --data")
    dataset = load_dataset(data_root)
    matrix, manifest = run_matrix(
        dataset,
        split,
        regressor,
        phonemes=pairs.get("phonemes"),
        ams=pairs.get("ams"),
        workers=args.workers,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(out / "results.csv", matrix.grid.values())
    write_marginals_csv(out / "marginals.csv", matrix)
    manifest.save(out / "manifest.json")
    if manifest.errors:
        log.warning("%d pair(s) failed; see manifest.json", len(manifest.errors))
    log.info("wrote %d pair results to %s", len(matrix.grid), out)
    return 0


def cmd_report(args) -> int:
    results_dir = Path(args.results)
    marginals = read_marginals_csv(results_dir / "marginals.csv")
    results = read_results_csv(results_dir / "results.csv")
    for kind, title in (("phoneme", "phonemes"), ("am", "measurements")):
        rows = [m for m in marginals if m["kind"] == kind]
        rows.sort(key=lambda m: m["rank"])
        if args.top is not None:
            rows = rows[: args.top]
        print(f"{title} by mean score (1 - CI upper bound), descending:")
        print(f"  {'rank':>4}  {'label':<14}{'mean score':>12}")
        for m in rows:
            print(f"  {m['rank']:>4}  {m['label']:<14}{m['mean_score']:>12.4f}")
        print()
    n_predictable = sum(1 for r in results if r["predictable"])
    print(f"{n_predictable}/{len(results)} pairs predictable "
          f"(CI upper bound < 1)")
    return 0


_COMMANDS = {
    "extract-mel": cmd_extract_mel,
    "compute-am": cmd_compute_am,
    "inventory": cmd_inventory,
    "synth": cmd_synth,
    "run": cmd_run,
    "report": cmd_report,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DivergenceError, RunError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (PhonofaceError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - unexpected
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())

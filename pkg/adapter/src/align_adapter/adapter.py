"""Batch alignment: WAV directory in, alignment TSV out."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .audio import TARGET_RATE, read_mono_16k
from .collapse import collapse_frames, merge_short_intervals
from .recognizer import DEFAULT_MODEL, AdapterDependencyError, make_backend

log = logging.getLogger("phoneme-align")


@dataclass(frozen=True)
class AdapterConfig:
    """Where to read, where to write, and which recognizer to use."""

    audio_dir: str
    out_path: str
    model: str = DEFAULT_MODEL
    device: str = "cpu"
    min_duration: float = 0.02  # seconds; shorter intervals merge into neighbors


def subject_of(utterance_id: str) -> str:
    """Subject naming convention: the stem up to the first underscore."""
    return utterance_id.split("_")[0]


def align_file(backend, path) -> list[tuple[str, float, float]]:
    """Intervals for one recording (label, start, end), sorted, non-overlapping."""
    samples = read_mono_16k(path)
    labels, hop = backend.frame_labels(samples, TARGET_RATE)
    return collapse_frames(labels, hop)


def align_corpus(cfg: AdapterConfig) -> Path:
    """Align every ``*.wav`` under ``audio_dir`` and write the TSV contract.

    Unreadable files are skipped with a log line; a missing or unloadable
    recognizer raises :class:`AdapterDependencyError` before any work starts.
    """
    backend = make_backend(cfg.model, cfg.device)
    files = sorted(Path(cfg.audio_dir).glob("*.wav"))
    if not files:
        raise FileNotFoundError(f"no .wav files under {cfg.audio_dir}")
    out_path = Path(cfg.out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    n_rows = 0
    with open(out_path, "w", encoding="utf-8", newline="") as handle:
        for path in files:
            try:
                intervals = align_file(backend, path)
            except (ValueError, OSError) as exc:
                log.warning("skipping %s: %s", path.name, exc)
                continue
            intervals = merge_short_intervals(intervals, cfg.min_duration)
            utterance = path.stem
            subject = subject_of(utterance)
            for label, start, end in intervals:
                handle.write(f"{utterance}\t{subject}\t{label}\t{start!r}\t{end!r}\n")
                n_rows += 1
    log.info("wrote %d interval rows for %d files to %s", n_rows, len(files), out_path)
    return out_path

"""Phoneme alignment ingestion, audio slicing, and inventory filtering.

The alignment TSV contract (also the interface to the external segmentation
adapter): UTF-8 rows
``utterance_id<TAB>subject_id<TAB>label<TAB>start_sec<TAB>end_sec``,
no header, one row per phoneme interval. Intervals within an utterance may
overlap by at most 5 ms (recognizer frame quantization); anything beyond is
rejected.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from .dsp import AudioClip
from .errors import AlignmentParseError

OVERLAP_TOLERANCE = 0.005  # seconds


class PhonemeInterval(NamedTuple):
    label: str
    start: float
    end: float


@dataclass(frozen=True)
class PhonemeAlignment:
    """Sorted phoneme intervals for one utterance of one subject."""

    utterance_id: str
    subject_id: str
    entries: tuple[PhonemeInterval, ...]

    def __post_init__(self):
        entries = tuple(
            sorted((PhonemeInterval(*e) for e in self.entries), key=lambda e: (e.start, e.end))
        )
        for e in entries:
            if not e.label:
                raise ValueError(f"{self.utterance_id}: empty phoneme label")
            if not 0 <= e.start < e.end:
                raise ValueError(
                    f"{self.utterance_id}: bad interval ({e.start}, {e.end}) for {e.label!r}"
                )
        for prev, cur in zip(entries, entries[1:]):
            if cur.start < prev.end - OVERLAP_TOLERANCE:
                raise ValueError(
                    f"{self.utterance_id}: {cur.label!r} at {cur.start} overlaps "
                    f"{prev.label!r} ending {prev.end} beyond tolerance"
                )
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class PhonemeInventory:
    """Instance counts per label and the labels meeting the frequency floor."""

    counts: dict[str, int]
    min_count: int
    retained: frozenset[str]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def parse_alignment_file(path) -> list[PhonemeAlignment]:
    """Parse an alignment TSV into one alignment per utterance.

    Rows may arrive in any order; each utterance's entries are returned
    sorted by start time. Raises :class:`AlignmentParseError` with the
    1-based row number of the first offending row.
    """
    grouped: dict[tuple[str, str], list[tuple[int, PhonemeInterval]]] = {}
    seen_utterances: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        for row_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise AlignmentParseError(
                    f"expected 5 tab-separated fields, got {len(fields)}", row=row_no
                )
            utt, subject, label, start_s, end_s = fields
            if not label:
                raise AlignmentParseError("empty phoneme label", row=row_no)
            try:
                start, end = float(start_s), float(end_s)
            except ValueError:
                raise AlignmentParseError(
                    f"non-numeric time in ({start_s!r}, {end_s!r})", row=row_no
                ) from None
            if start < 0:
                raise AlignmentParseError(f"negative start time {start}", row=row_no)
            if end <= start:
                raise AlignmentParseError(
                    f"end {end} not after start {start}", row=row_no
                )
            if seen_utterances.setdefault(utt, subject) != subject:
                raise AlignmentParseError(
                    f"utterance {utt!r} listed under two subjects", row=row_no
                )
            grouped.setdefault((utt, subject), []).append(
                (row_no, PhonemeInterval(label, start, end))
            )

    alignments = []
    for (utt, subject), rows in grouped.items():
        rows.sort(key=lambda item: (item[1].start, item[1].end))
        for (_, prev), (row_no, cur) in zip(rows, rows[1:]):
            if cur.start < prev.end - OVERLAP_TOLERANCE:
                raise AlignmentParseError(
                    f"{cur.label!r} at {cur.start} overlaps {prev.label!r} "
                    f"ending {prev.end} beyond {OVERLAP_TOLERANCE * 1000:g} ms",
                    row=row_no,
                )
        alignments.append(
            PhonemeAlignment(
                utterance_id=utt,
                subject_id=subject,
                entries=tuple(interval for _, interval in rows),
            )
        )
    return alignments


def parse_alignment(path) -> PhonemeAlignment:
    """Parse a TSV that must contain exactly one utterance."""
    alignments = parse_alignment_file(path)
    if len(alignments) != 1:
        raise AlignmentParseError(
            f"{path}: expected exactly one utterance, found {len(alignments)}"
        )
    return alignments[0]


def write_alignment_file(path, alignments) -> None:
    """Serialize alignments in the TSV contract (floats via repr round-trip)."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for alignment in alignments:
            for e in alignment.entries:
                handle.write(
                    f"{alignment.utterance_id}\t{alignment.subject_id}\t"
                    f"{e.label}\t{e.start!r}\t{e.end!r}\n"
                )


def slice_clip(clip: AudioClip, start: float, end: float) -> AudioClip:
    """Extract samples [round(start*sr), round(end*sr)) as a new clip."""
    if not 0 <= start < end:
        raise ValueError(f"need 0 <= start < end, got ({start}, {end})")
    if end > clip.duration + 1e-9:
        raise ValueError(
            f"interval ({start}, {end}) exceeds clip duration {clip.duration:.6f}"
        )
    i0 = int(round(start * clip.sample_rate))
    i1 = min(int(round(end * clip.sample_rate)), len(clip.samples))
    if i1 <= i0:
        raise ValueError(f"interval ({start}, {end}) is shorter than one sample")
    return AudioClip(samples=clip.samples[i0:i1], sample_rate=clip.sample_rate)


def build_inventory(alignments, min_count: int = 5000) -> PhonemeInventory:
    """Count phoneme instances and retain labels with count >= min_count."""
    counts = Counter(e.label for a in alignments for e in a.entries)
    retained = frozenset(l for l, c in counts.items() if c >= min_count)
    return PhonemeInventory(counts=dict(counts), min_count=min_count, retained=retained)

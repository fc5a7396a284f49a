"""Frame-label sequences to sorted, non-overlapping phoneme intervals."""

from __future__ import annotations


def collapse_frames(labels, hop: float) -> list[tuple[str, float, float]]:
    """Merge runs of identical consecutive labels into intervals.

    Each frame is treated as owning the tile ``[i*hop, (i+1)*hop)``, so the
    output tiles never overlap. ``None`` frames (silence) separate runs and
    produce no interval.
    """
    intervals: list[list] = []
    for i, label in enumerate(labels):
        if label is None:
            continue
        start, end = i * hop, (i + 1) * hop
        if intervals and intervals[-1][0] == label and abs(intervals[-1][2] - start) < 1e-9:
            intervals[-1][2] = end
        else:
            intervals.append([label, start, end])
    return [tuple(item) for item in intervals]


def merge_short_intervals(intervals, min_duration: float) -> list[tuple[str, float, float]]:
    """Absorb intervals shorter than ``min_duration`` into a neighbor.

    A short interval extends the previous interval (or, at the front, the
    following one). A lone short interval is kept: it is still a valid row.
    Afterwards contiguous same-label intervals are re-merged.
    """
    items = [list(it) for it in intervals]
    changed = True
    while changed and len(items) > 1:
        changed = False
        for i, item in enumerate(items):
            if item[2] - item[1] < min_duration:
                if i > 0:
                    items[i - 1][2] = item[2]
                else:
                    items[1][1] = item[1]
                del items[i]
                changed = True
                break
    merged: list[list] = []
    for item in items:
        if merged and merged[-1][0] == item[0] and item[1] <= merged[-1][2] + 1e-9:
            merged[-1][2] = max(merged[-1][2], item[2])
        else:
            merged.append(list(item))
    return [tuple(item) for item in merged]

import numpy as np
import pytest

from phonoface import segments
from phonoface.dsp import AudioClip
from phonoface.errors import AlignmentParseError


def write_tsv(tmp_path, text, name="a.tsv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# parsing

def test_parse_single_row(tmp_path):
    path = write_tsv(tmp_path, "u1\ts1\tiː\t0.10\t0.25\n")
    alignment = segments.parse_alignment(path)
    assert alignment.utterance_id == "u1"
    assert alignment.subject_id == "s1"
    assert alignment.entries == (segments.PhonemeInterval("iː", 0.10, 0.25),)


def test_parse_reversed_interval_reports_row(tmp_path):
    path = write_tsv(tmp_path, "u1\ts1\ta\t0.1\t0.2\nu1\ts1\tb\t0.5\t0.4\n")
    with pytest.raises(AlignmentParseError, match="row 2"):
        segments.parse_alignment_file(path)


def test_parse_sorts_unordered_rows(tmp_path):
    path = write_tsv(tmp_path, "u1\ts1\tb\t0.5\t0.6\nu1\ts1\ta\t0.1\t0.2\n")
    alignment = segments.parse_alignment(path)
    assert [e.label for e in alignment.entries] == ["a", "b"]


def test_parse_non_numeric_time(tmp_path):
    path = write_tsv(tmp_path, "u1\ts1\ta\tx\t0.2\n")
    with pytest.raises(AlignmentParseError, match="row 1"):
        segments.parse_alignment_file(path)


def test_parse_overlap_tolerance(tmp_path):
    # 4 ms overlap tolerated, 20 ms rejected
    ok = write_tsv(tmp_path, "u1\ts1\ta\t0.10\t0.20\nu1\ts1\tb\t0.196\t0.30\n", "ok.tsv")
    assert len(segments.parse_alignment(ok).entries) == 2
    bad = write_tsv(tmp_path, "u1\ts1\ta\t0.10\t0.20\nu1\ts1\tb\t0.18\t0.30\n", "bad.tsv")
    with pytest.raises(AlignmentParseError, match="overlap"):
        segments.parse_alignment_file(bad)


def test_parse_groups_by_utterance(tmp_path):
    path = write_tsv(
        tmp_path,
        "u1\ts1\ta\t0.1\t0.2\nu2\ts2\tb\t0.0\t0.1\nu1\ts1\tc\t0.3\t0.4\n",
    )
    alignments = segments.parse_alignment_file(path)
    assert sorted(a.utterance_id for a in alignments) == ["u1", "u2"]
    with pytest.raises(AlignmentParseError, match="exactly one"):
        segments.parse_alignment(path)


def test_parse_empty_file_is_empty_corpus(tmp_path):
    path = write_tsv(tmp_path, "")
    assert segments.parse_alignment_file(path) == []


def test_round_trip_identity(tmp_path):
    original = [
        segments.PhonemeAlignment(
            utterance_id="u1",
            subject_id="s1",
            entries=(("iː", 0.1, 0.25), ("b", 0.3, 0.41)),
        ),
        segments.PhonemeAlignment(
            utterance_id="u2",
            subject_id="s2",
            entries=(("æ", 0.0, 0.125),),
        ),
    ]
    path = tmp_path / "round.tsv"
    segments.write_alignment_file(path, original)
    back = segments.parse_alignment_file(path)
    assert sorted(back, key=lambda a: a.utterance_id) == sorted(
        original, key=lambda a: a.utterance_id
    )
    # serialize -> parse -> serialize is byte-stable
    path2 = tmp_path / "round2.tsv"
    segments.write_alignment_file(path2, back)
    assert path.read_bytes() == path2.read_bytes()


def test_alignment_invariants():
    with pytest.raises(ValueError):
        segments.PhonemeAlignment("u", "s", (("", 0.0, 0.1),))
    with pytest.raises(ValueError):
        segments.PhonemeAlignment("u", "s", (("a", -0.1, 0.1),))
    with pytest.raises(ValueError):
        segments.PhonemeAlignment("u", "s", (("a", 0.0, 0.2), ("b", 0.1, 0.3)))


# ---------------------------------------------------------------------------
# slicing

def one_second_clip():
    return AudioClip(samples=np.linspace(-0.5, 0.5, 16000), sample_rate=16000)


def test_slice_quarter_to_half():
    piece = segments.slice_clip(one_second_clip(), 0.25, 0.50)
    assert len(piece.samples) == 4000
    assert piece.sample_rate == 16000


def test_slice_full_range_identity():
    clip = one_second_clip()
    piece = segments.slice_clip(clip, 0.0, 1.0)
    assert np.array_equal(piece.samples, clip.samples)


def test_slice_out_of_range():
    with pytest.raises(ValueError):
        segments.slice_clip(one_second_clip(), 0.9, 1.1)
    with pytest.raises(ValueError):
        segments.slice_clip(one_second_clip(), 0.5, 0.5)


def test_slice_composition_is_sample_exact():
    clip = one_second_clip()
    rng = np.random.default_rng(5)
    sr = clip.sample_rate
    for _ in range(25):
        # sample-aligned interval arithmetic composes exactly
        a, b = sorted(rng.integers(0, 16000, size=2))
        if b - a < 20:
            continue
        c, d = sorted(rng.integers(0, b - a, size=2))
        if d - c < 2:
            continue
        outer = segments.slice_clip(clip, a / sr, b / sr)
        nested = segments.slice_clip(outer, c / sr, d / sr)
        direct = segments.slice_clip(clip, (a + c) / sr, (a + d) / sr)
        assert np.array_equal(nested.samples, direct.samples)


# ---------------------------------------------------------------------------
# inventory

def make_alignment(labels):
    entries = tuple((label, 0.1 * i, 0.1 * i + 0.05) for i, label in enumerate(labels))
    return segments.PhonemeAlignment("u", "s", entries)


def test_inventory_threshold():
    inv = segments.build_inventory([make_alignment(["a", "a", "a", "b"])], min_count=2)
    assert inv.counts == {"a": 3, "b": 1}
    assert inv.retained == {"a"}


def test_inventory_zero_threshold_keeps_all():
    inv = segments.build_inventory([make_alignment(["a", "b"])], min_count=0)
    assert inv.retained == {"a", "b"}


def test_inventory_empty():
    inv = segments.build_inventory([], min_count=3)
    assert inv.counts == {} and inv.retained == frozenset()


def test_inventory_counts_partition():
    inv = segments.build_inventory(
        [make_alignment(["a", "a", "b", "c", "c", "c"])], min_count=2
    )
    retained_total = sum(inv.counts[l] for l in inv.retained)
    dropped_total = sum(c for l, c in inv.counts.items() if l not in inv.retained)
    assert retained_total + dropped_total == inv.total == 6

"""Batch phoneme alignment adapter.

Converts a directory of WAV recordings into the analysis pipeline's alignment
TSV contract: UTF-8 rows
``utterance_id<TAB>subject_id<TAB>label<TAB>start_sec<TAB>end_sec``,
sorted, non-overlapping, one row per phoneme interval.

Two recognizer backends produce the per-frame labels that get collapsed into
intervals: a pretrained CTC phoneme model (via ``transformers``, needs the
checkpoint available locally or a network path to fetch it) and a
self-contained spectral labeler for offline runs and contract tests.
"""

__version__ = "0.1.0"

from .adapter import AdapterConfig, AdapterDependencyError, align_corpus, align_file  # noqa: F401
from .collapse import collapse_frames, merge_short_intervals  # noqa: F401
from .recognizer import SpectralBackend, Wav2Vec2Backend, make_backend  # noqa: F401

"""Synthetic paired datasets with planted, controllable correlations.

Per subject, measurement values are standard-normal draws. Each clip is
time-smoothed Gaussian noise in spectrogram space; for a planted
(phoneme, measurement) pair with strength ``beta``, the block of designated
mel bins additionally receives the constant ``offset + scale * beta * value``
across all of its cells. The mean over that block (the planted summary
statistic) is therefore an affine function of ``beta * value``, with an
exactly known noise variance:

    var = noise_std^2 * sum(kernel)^2 / (block_width * n_frames)

since the smoothing kernel is applied circularly along time. Null pairs and
``beta = 0`` leave clips statistically independent of the measurement.
Planting happens directly in spectrogram space so the statistical machinery
is validated in isolation from the waveform front end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anthropometry import AMVector
from .dsp import MelConfig, MelSpectrogram
from .experiment import Dataset

SIGNAL_OFFSET = 0.0
# Per-cell plant amplitude. Kept well below the per-cell noise floor so that
# recovery quality varies with beta instead of saturating at the optimizer's
# fit limit; the block mean still pools it far above the statistic's noise.
SIGNAL_SCALE = 0.1
SMOOTHING_KERNEL = (0.25, 0.5, 0.25)  # sums to 1, applied circularly over time


@dataclass(frozen=True)
class SyntheticSpec:
    """Size, labels, planted effects, and noise level of a synthetic dataset."""

    n_subjects: int = 100
    clips_per_phoneme_per_subject: int = 5
    phoneme_labels: tuple[str, ...] = ("iː", "b")
    am_names: tuple[str, ...] = ("31-37", "2-7")
    planted: dict[tuple[str, str], float] = field(default_factory=dict)
    noise_std: float = 0.3
    seed: int = 0
    n_mels: int = 64
    target_frames: int = 32
    block_width: int = 8

    def __post_init__(self):
        object.__setattr__(self, "phoneme_labels", tuple(self.phoneme_labels))
        object.__setattr__(self, "am_names", tuple(self.am_names))
        object.__setattr__(
            self, "planted", {(p, a): float(b) for (p, a), b in self.planted.items()}
        )
        if self.n_subjects < 1 or self.clips_per_phoneme_per_subject < 1:
            raise ValueError("need at least one subject and one clip per phoneme")
        if not self.phoneme_labels or not self.am_names:
            raise ValueError("phoneme_labels and am_names must be non-empty")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if not 1 <= self.block_width <= self.n_mels:
            raise ValueError("block_width must lie in [1, n_mels]")
        for (phoneme, am), beta in self.planted.items():
            if phoneme not in self.phoneme_labels or am not in self.am_names:
                raise ValueError(f"planted pair ({phoneme!r}, {am!r}) not in the label lists")
            if not 0.0 <= beta <= 1.0:
                raise ValueError(f"effect strength must lie in [0, 1], got {beta}")

    def designated_bins(self, am: str) -> np.ndarray:
        """Mel-bin block carrying the signal for one measurement."""
        index = self.am_names.index(am)
        start = (index * self.block_width) % (self.n_mels - self.block_width + 1)
        return np.arange(start, start + self.block_width)


def _smooth_time(noise: np.ndarray) -> np.ndarray:
    """Circular convolution of each bin's frame sequence with the kernel."""
    kernel = np.asarray(SMOOTHING_KERNEL)
    out = np.zeros_like(noise)
    for offset, weight in enumerate(kernel):
        out += weight * np.roll(noise, offset - 1, axis=-1)
    return out


def statistic_noise_variance(spec: SyntheticSpec) -> float:
    """Exact variance of the planted summary statistic under pure noise."""
    kernel_sum = float(np.sum(SMOOTHING_KERNEL))
    return spec.noise_std**2 * kernel_sum**2 / (spec.block_width * spec.target_frames)


def generate(spec: SyntheticSpec) -> tuple[Dataset, dict]:
    """Draw a full synthetic dataset plus its ground-truth record.

    Deterministic given ``spec.seed``: measurement values are drawn first
    (subjects x measurements in one block), then clip noise in
    (phoneme, subject, clip) order.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    am_matrix = rng.standard_normal((spec.n_subjects, len(spec.am_names)))
    subject_ids = [f"s{i:04d}" for i in range(spec.n_subjects)]
    subjects = {
        sid: AMVector(subject_id=sid, values=dict(zip(spec.am_names, row)))
        for sid, row in zip(subject_ids, am_matrix)
    }

    config = MelConfig(n_mels=spec.n_mels, target_frames=spec.target_frames)
    clips: dict[str, list[tuple[str, MelSpectrogram]]] = {p: [] for p in spec.phoneme_labels}
    for phoneme in spec.phoneme_labels:
        planted_here = [
            (am, beta) for (p, am), beta in sorted(spec.planted.items()) if p == phoneme
        ]
        for s_index, sid in enumerate(subject_ids):
            for _ in range(spec.clips_per_phoneme_per_subject):
                noise = rng.standard_normal((spec.n_mels, spec.target_frames))
                bins = spec.noise_std * _smooth_time(noise)
                for am, beta in planted_here:
                    value = am_matrix[s_index, spec.am_names.index(am)]
                    bins[spec.designated_bins(am), :] += (
                        SIGNAL_OFFSET + SIGNAL_SCALE * beta * value
                    )
                clips[phoneme].append(
                    (sid, MelSpectrogram(bins=bins, config=config))
                )

    ground_truth = {
        "planted": [
            {
                "phoneme": phoneme,
                "am": am,
                "beta": beta,
                "bins": [int(b) for b in spec.designated_bins(am)],
                "offset": SIGNAL_OFFSET,
                "scale": SIGNAL_SCALE,
            }
            for (phoneme, am), beta in sorted(spec.planted.items())
        ],
        "statistic": "mean over designated bins; value = (statistic - offset) / (scale * beta)",
        "statistic_noise_variance": statistic_noise_variance(spec),
        "noise_std": spec.noise_std,
        "smoothing_kernel": list(SMOOTHING_KERNEL),
        "seed": spec.seed,
        "n_subjects": spec.n_subjects,
        "clips_per_phoneme_per_subject": spec.clips_per_phoneme_per_subject,
    }
    return Dataset(subjects=subjects, clips=clips), ground_truth


def planted_summary(clip, bins) -> float:
    """Mean energy over the designated bins — the analytic plant statistic."""
    mat = np.asarray(getattr(clip, "bins", clip), dtype=np.float64)
    return float(mat[np.asarray(bins, dtype=int), :].mean())


def spec_from_dict(payload: dict) -> SyntheticSpec:
    """Build a SyntheticSpec from a JSON-style dict (planted as a list)."""
    planted = {
        (entry["phoneme"], entry["am"]): entry["beta"]
        for entry in payload.get("planted", [])
    }
    kwargs = {
        key: payload[key]
        for key in (
            "n_subjects",
            "clips_per_phoneme_per_subject",
            "noise_std",
            "seed",
            "n_mels",
            "target_frames",
            "block_width",
        )
        if key in payload
    }
    return SyntheticSpec(
        phoneme_labels=tuple(payload["phoneme_labels"]),
        am_names=tuple(payload["am_names"]),
        planted=planted,
        **kwargs,
    )

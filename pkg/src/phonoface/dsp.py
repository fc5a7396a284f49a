"""Waveform-to-spectrogram front end.

Turns mono PCM recordings into fixed-shape log mel spectrograms: STFT with a
periodic Hann window, triangular mel filterbank (HTK scale,
``mel(f) = 2595*log10(1 + f/700)``) over the one-sided power spectrum, then
``log(x + log_floor)``. Per-bin z-normalization is a separate fit/transform
step so that statistics can be fitted on a training split and reused
unchanged on held-out data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (
    AudioFormatError,
    CacheFormatError,
    ClipTooShortError,
    ShapeError,
    UnsupportedAudioError,
)
from .validation import check_finite, spectrogram_batch

MEL_CACHE_MAGIC = b"PFMS"

# full-scale divisors for integer PCM, keyed by the dtype scipy returns
_PCM_SCALE = {
    np.dtype(np.uint8): 128.0,
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
}


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        check_finite(samples, "samples")
        if np.max(np.abs(samples)) > 1.0 + 1e-9:
            raise ValueError("samples must lie in [-1, 1]")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class MelConfig:
    """Extraction recipe for log mel spectrograms.

    ``window_length`` and ``hop_length`` are in seconds; ``fft_size`` must be
    at least one window of samples at the rate the config is used with.
    """

    n_mels: int = 64
    window_length: float = 0.025
    hop_length: float = 0.010
    fft_size: int = 512
    f_min: float = 0.0
    f_max: float = 8000.0
    target_frames: int = 32
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")
        if self.window_length <= 0 or self.hop_length <= 0:
            raise ValueError("window_length and hop_length must be positive")
        if not 0 <= self.f_min < self.f_max:
            raise ValueError("need 0 <= f_min < f_max")
        if self.target_frames < 1:
            raise ValueError("target_frames must be >= 1")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")

    def validate_for(self, sample_rate: int) -> None:
        """Check the rate-dependent invariants."""
        if self.f_max > sample_rate / 2 + 1e-9:
            raise ValueError(
                f"f_max {self.f_max} exceeds Nyquist for rate {sample_rate}"
            )
        if self.fft_size < self.window_samples(sample_rate):
            raise ValueError("fft_size must cover at least one analysis window")

    def window_samples(self, sample_rate: int) -> int:
        return int(round(self.window_length * sample_rate))

    def hop_samples(self, sample_rate: int) -> int:
        return int(round(self.hop_length * sample_rate))


@dataclass(frozen=True)
class MelSpectrogram:
    """Log mel frames for one clip, shape (n_mels, n_frames)."""

    bins: np.ndarray
    config: MelConfig

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.float64)
        if bins.ndim != 2:
            raise ShapeError(f"bins must be 2-D, got shape {bins.shape}")
        check_finite(bins, "bins")
        object.__setattr__(self, "bins", bins)

    @property
    def n_mels(self) -> int:
        return self.bins.shape[0]

    @property
    def n_frames(self) -> int:
        return self.bins.shape[1]


def load_wav(path) -> AudioClip:
    """Read a PCM WAV file as a mono clip scaled to [-1, 1].

    Supports 8/16/32-bit integer and 32/64-bit float encodings; multi-channel
    input is averaged down to mono.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, struct.error) as exc:
        message = str(exc)
        if "Unknown wave file format" in message:
            raise UnsupportedAudioError(f"{path}: {message}") from exc
        raise AudioFormatError(f"{path}: {message}") from exc

    if data.size == 0:
        raise AudioFormatError(f"{path}: file contains no samples")
    if data.dtype in _PCM_SCALE:
        offset = 128.0 if data.dtype == np.uint8 else 0.0
        samples = (data.astype(np.float64) - offset) / _PCM_SCALE[data.dtype]
    elif data.dtype in (np.float32, np.float64):
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise UnsupportedAudioError(f"{path}: unsupported sample dtype {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioClip(samples=samples, sample_rate=int(rate))


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Resample by linear interpolation (identity if rates already match)."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if clip.sample_rate == target_rate:
        return clip
    n_out = max(1, int(round(len(clip.samples) * target_rate / clip.sample_rate)))
    positions = np.arange(n_out) * (clip.sample_rate / target_rate)
    samples = np.interp(positions, np.arange(len(clip.samples)), clip.samples)
    return AudioClip(samples=samples, sample_rate=target_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filter_centers(cfg: MelConfig) -> np.ndarray:
    """Center frequencies (Hz) of the triangular filters."""
    pts = mel_to_hz(np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.n_mels + 2))
    return pts[1:-1]


def mel_filterbank(cfg: MelConfig, sample_rate: int) -> np.ndarray:
    """Triangular filter matrix of shape (n_mels, fft_size//2 + 1)."""
    cfg.validate_for(sample_rate)
    n_bins = cfg.fft_size // 2 + 1
    freqs = np.arange(n_bins) * sample_rate / cfg.fft_size
    pts = mel_to_hz(np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.n_mels + 2))
    bank = np.zeros((cfg.n_mels, n_bins))
    for m in range(cfg.n_mels):
        left, center, right = pts[m], pts[m + 1], pts[m + 2]
        rising = (freqs - left) / (center - left)
        falling = (right - freqs) / (right - center)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def frame_count(n_samples: int, window: int, hop: int) -> int:
    """Number of full analysis windows: 1 + floor((n - window) / hop)."""
    if n_samples < window:
        raise ClipTooShortError(
            f"{n_samples} samples is shorter than one {window}-sample window"
        )
    return 1 + (n_samples - window) // hop


def _hann_periodic(length: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)


def log_mel(clip: AudioClip, cfg: MelConfig | None = None) -> MelSpectrogram:
    """Compute the log mel spectrogram of a clip.

    Frames are hopped without centering, windowed with a periodic Hann
    window, zero-padded to ``fft_size``, and reduced to one-sided power
    before the filterbank and log compression.
    """
    cfg = cfg or MelConfig()
    cfg.validate_for(clip.sample_rate)
    window = cfg.window_samples(clip.sample_rate)
    hop = cfg.hop_samples(clip.sample_rate)
    n_frames = frame_count(len(clip.samples), window, hop)

    idx = hop * np.arange(n_frames)[:, None] + np.arange(window)[None, :]
    frames = clip.samples[idx] * _hann_periodic(window)
    spectrum = np.fft.rfft(frames, n=cfg.fft_size, axis=1)
    power = np.abs(spectrum) ** 2
    mel_power = power @ mel_filterbank(cfg, clip.sample_rate).T
    bins = np.log(mel_power + cfg.log_floor).T
    return MelSpectrogram(bins=bins, config=cfg)


def fix_length(spec: MelSpectrogram, target_frames: int) -> MelSpectrogram:
    """Center-crop or symmetrically zero-pad to exactly ``target_frames``."""
    if target_frames < 1:
        raise ValueError("target_frames must be >= 1")
    n = spec.n_frames
    if n == target_frames:
        return spec
    if n > target_frames:
        start = (n - target_frames) // 2
        bins = spec.bins[:, start : start + target_frames]
    else:
        excess = target_frames - n
        left = excess // 2
        bins = np.zeros((spec.n_mels, target_frames))
        bins[:, left : left + n] = spec.bins
    return MelSpectrogram(bins=bins, config=spec.config)


class MelBinNormalizer(TransformerMixin, BaseEstimator):
    """Per-mel-bin z-scoring with statistics reusable on held-out data.

    ``fit`` pools every frame of the corpus per bin and stores the mean and
    (population) standard deviation; ``transform`` applies them unchanged, so
    the normalizer can be fitted on a training split only.
    """

    def __init__(self, std_floor: float = 1e-8):
        self.std_floor = std_floor

    def fit(self, X, y=None):
        stacked = self._pool(X)
        self.n_mels_ = stacked.shape[0]
        self.mean_ = stacked.mean(axis=1)
        self.scale_ = np.maximum(stacked.std(axis=1), self.std_floor)
        return self

    def transform(self, X):
        if not hasattr(self, "mean_"):
            raise RuntimeError("normalizer is not fitted")
        if isinstance(X, np.ndarray) and X.ndim == 3:
            self._check_mels(X.shape[1])
            return (X - self.mean_[None, :, None]) / self.scale_[None, :, None]
        if hasattr(X, "bins"):
            return self._transform_one(X)
        return [self._transform_one(s) for s in X]

    def _transform_one(self, spec):
        mat = np.asarray(getattr(spec, "bins", spec), dtype=np.float64)
        self._check_mels(mat.shape[0])
        out = (mat - self.mean_[:, None]) / self.scale_[:, None]
        if hasattr(spec, "bins"):
            return MelSpectrogram(bins=out, config=spec.config)
        return out

    def _check_mels(self, n_mels: int) -> None:
        if n_mels != self.n_mels_:
            raise ShapeError(f"expected {self.n_mels_} mel bins, got {n_mels}")

    @staticmethod
    def _pool(X) -> np.ndarray:
        """Concatenate all frames along time, shape (n_mels, total_frames)."""
        if isinstance(X, np.ndarray) and X.ndim == 3:
            return np.transpose(X, (1, 0, 2)).reshape(X.shape[1], -1)
        mats = [np.asarray(getattr(s, "bins", s), dtype=np.float64) for s in X]
        if not mats:
            raise ValueError("corpus is empty")
        n_mels = mats[0].shape[0]
        for i, m in enumerate(mats):
            if m.ndim != 2 or m.shape[0] != n_mels:
                raise ShapeError(
                    f"corpus[{i}] has shape {m.shape}, expected ({n_mels}, *)"
                )
        return np.concatenate(mats, axis=1)


def normalize_per_bin(corpus, std_floor: float = 1e-8):
    """Z-score a spectrogram corpus per bin.

    Returns ``(normalized corpus, fitted MelBinNormalizer)``; apply the
    returned normalizer to held-out data instead of refitting.
    """
    normalizer = MelBinNormalizer(std_floor=std_floor).fit(corpus)
    return normalizer.transform(corpus), normalizer


def save_mel(path, spec: MelSpectrogram) -> None:
    """Write one spectrogram in the flat binary cache layout.

    Header: magic ``PFMS``, u32 n_mels, u32 n_frames (little-endian);
    payload: row-major float32 values.
    """
    header = struct.pack("<4sII", MEL_CACHE_MAGIC, spec.n_mels, spec.n_frames)
    data = spec.bins.astype("<f4").tobytes(order="C")
    Path(path).write_bytes(header + data)


def load_mel(path, config: MelConfig | None = None) -> MelSpectrogram:
    """Read a spectrogram written by :func:`save_mel`."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise CacheFormatError(f"{path}: truncated header")
    magic, n_mels, n_frames = struct.unpack_from("<4sII", raw)
    if magic != MEL_CACHE_MAGIC:
        raise CacheFormatError(f"{path}: bad magic {magic!r}")
    expected = 12 + 4 * n_mels * n_frames
    if len(raw) != expected:
        raise CacheFormatError(f"{path}: expected {expected} bytes, got {len(raw)}")
    bins = np.frombuffer(raw, dtype="<f4", offset=12).astype(np.float64)
    bins = bins.reshape(n_mels, n_frames)
    if config is not None and config.n_mels != n_mels:
        raise CacheFormatError(
            f"{path}: file has {n_mels} mel bins, config expects {config.n_mels}"
        )
    return MelSpectrogram(bins=bins, config=config or MelConfig(n_mels=n_mels))

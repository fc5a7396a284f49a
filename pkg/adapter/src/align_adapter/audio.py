"""Minimal WAV reading for the adapter (mono float64 in [-1, 1], 16 kHz)."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

TARGET_RATE = 16000

_PCM_SCALE = {
    np.dtype(np.uint8): (128.0, 128.0),
    np.dtype(np.int16): (0.0, 32768.0),
    np.dtype(np.int32): (0.0, 2147483648.0),
}


def read_mono_16k(path) -> np.ndarray:
    """Read a WAV file, downmix to mono, scale to [-1, 1], resample to 16 kHz."""
    rate, data = wavfile.read(path)
    if data.size == 0:
        raise ValueError(f"{path}: no samples")
    if data.dtype in _PCM_SCALE:
        offset, scale = _PCM_SCALE[data.dtype]
        samples = (data.astype(np.float64) - offset) / scale
    elif data.dtype in (np.float32, np.float64):
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise ValueError(f"{path}: unsupported sample dtype {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if rate != TARGET_RATE:
        n_out = max(1, int(round(len(samples) * TARGET_RATE / rate)))
        positions = np.arange(n_out) * (rate / TARGET_RATE)
        samples = np.interp(positions, np.arange(len(samples)), samples)
    return samples

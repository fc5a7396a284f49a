"""Frame-level phoneme labelers.

A backend maps a 16 kHz waveform to ``(labels, hop_seconds)`` where
``labels[i]`` is the phoneme label of the frame starting at ``i * hop``
(``None`` marks silence / blank frames).
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

DEFAULT_MODEL = "facebook/wav2vec2-xlsr-53-espeak-cv-ft"
BUILTIN_SPECTRAL = "builtin:spectral"


class AdapterDependencyError(RuntimeError):
    """The requested recognizer backend is unavailable."""


class SpectralBackend:
    """Self-contained stand-in recognizer for offline runs and tests.

    Labels each 25 ms frame by its spectral centroid band (a fixed pseudo-
    phone list) and marks low-energy frames as silence. This is a contract-
    level stand-in, not a phonetic model: labels are stable and well-formed,
    nothing more.
    """

    labels = ("uː", "ɔː", "ɑː", "ɛ", "æ", "eː", "iː", "ʃ", "s")
    centroid_edges = (400.0, 700.0, 1000.0, 1400.0, 1900.0, 2500.0, 3200.0, 4500.0)

    def __init__(self, window: float = 0.025, hop: float = 0.010,
                 silence_ratio: float = 0.1, silence_floor: float = 1e-4):
        self.window = window
        self.hop = hop
        self.silence_ratio = silence_ratio
        self.silence_floor = silence_floor

    def frame_labels(self, samples: np.ndarray, rate: int):
        window = int(round(self.window * rate))
        hop = int(round(self.hop * rate))
        if len(samples) < window:
            return [], self.hop
        n_frames = 1 + (len(samples) - window) // hop
        idx = hop * np.arange(n_frames)[:, None] + np.arange(window)[None, :]
        frames = samples[idx]
        rms = np.sqrt(np.mean(frames**2, axis=1))
        threshold = max(self.silence_floor, self.silence_ratio * float(rms.max()))

        spectrum = np.abs(np.fft.rfft(frames * np.hanning(window), axis=1)) ** 2
        freqs = np.fft.rfftfreq(window, d=1.0 / rate)
        power = spectrum.sum(axis=1)
        centroid = np.where(power > 0, spectrum @ freqs / np.maximum(power, 1e-30), 0.0)

        out = []
        for i in range(n_frames):
            if rms[i] < threshold:
                out.append(None)
            else:
                out.append(self.labels[bisect_right(self.centroid_edges, centroid[i])])
        return out, self.hop


class Wav2Vec2Backend:
    """Pretrained multilingual CTC phoneme recognizer via ``transformers``.

    Frame posteriors are collapsed by per-frame argmax; pad/blank and word
    delimiter tokens map to silence. Loading needs the checkpoint locally
    cached or a network path to the model hub.
    """

    def __init__(self, model_id: str = DEFAULT_MODEL, device: str = "cpu"):
        try:
            import torch  # noqa: F401
            from transformers import AutoModelForCTC, AutoProcessor
        except ImportError as exc:
            raise AdapterDependencyError(
                "the pretrained backend needs the 'model' extra "
                "(pip install phoneme-align-adapter[model])"
            ) from exc
        try:
            self._processor = AutoProcessor.from_pretrained(model_id)
            self._model = AutoModelForCTC.from_pretrained(model_id).to(device).eval()
        except Exception as exc:
            raise AdapterDependencyError(
                f"could not load recognizer {model_id!r}: {exc}"
            ) from exc
        self._device = device
        vocab = self._processor.tokenizer.get_vocab()
        self._id_to_token = {i: t for t, i in vocab.items()}
        special = set(self._processor.tokenizer.all_special_tokens)
        special.add(self._processor.tokenizer.pad_token)
        self._silence_tokens = {t for t in special if t} | {"|", " "}

    def frame_labels(self, samples: np.ndarray, rate: int):
        import torch

        inputs = self._processor(
            samples.astype(np.float32), sampling_rate=rate, return_tensors="pt"
        )
        with torch.no_grad():
            logits = self._model(inputs.input_values.to(self._device)).logits[0]
        ids = logits.argmax(dim=-1).tolist()
        hop = (len(samples) / rate) / max(len(ids), 1)
        labels = []
        for token_id in ids:
            token = self._id_to_token.get(int(token_id), "")
            labels.append(None if not token or token in self._silence_tokens else token)
        return labels, hop


def make_backend(model: str, device: str = "cpu"):
    """``builtin:spectral`` or a transformers model identifier."""
    if model == BUILTIN_SPECTRAL:
        return SpectralBackend()
    if model.startswith("builtin:"):
        raise AdapterDependencyError(f"unknown builtin backend {model!r}")
    return Wav2Vec2Backend(model_id=model, device=device)

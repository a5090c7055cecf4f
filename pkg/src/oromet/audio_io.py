"""WAV input/output and the in-memory audio clip type."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .errors import MissingFile, ParseError


@dataclass(frozen=True)
class AudioClip:
    """Mono audio with normalized amplitude in [-1, 1].

    samples are float64; stereo sources are downmixed by channel averaging
    at load time.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ParseError("audio clip must be a non-empty 1-D sample array")
        if not np.all(np.isfinite(samples)):
            raise ParseError("audio clip contains non-finite samples")
        if self.sample_rate < 16000:
            raise ParseError(f"sample rate {self.sample_rate} below 16 kHz minimum")
        peak = np.max(np.abs(samples))
        if peak > 1.0:
            samples = samples / peak
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def load_wav(path: str | os.PathLike) -> AudioClip:
    """Read a PCM or float WAV file into a normalized mono clip."""
    if not os.path.isfile(path):
        raise MissingFile(f"audio file not found: {path}")
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:
        raise ParseError(f"cannot read WAV {path}: {exc}") from exc
    data = np.asarray(data)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        samples = data / 32768.0
    elif data.dtype == np.int32:
        samples = data / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    else:
        samples = data.astype(np.float64)
    return AudioClip(samples=samples, sample_rate=int(rate))


def save_wav(path: str | os.PathLike, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM."""
    pcm = np.clip(clip.samples, -1.0, 1.0)
    wavfile.write(path, clip.sample_rate, (pcm * 32767).astype(np.int16))

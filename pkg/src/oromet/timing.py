"""Energy-based voice activity detection and reading-task timing metrics.

Rates are computed from the *expected* word count of the task (forced
alignment is deliberately avoided), so implausible values are screened by
the passage-task outlier filter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .errors import ClipTooShort, NoSpeechDetected

VAD_FRAME = 0.025
VAD_HOP = 0.010
VAD_MARGIN_DB = 10.0
MIN_PAUSE = 0.200
MIN_SPEECH = 0.100

# A clip whose frame-energy spread stays under the margin is homogeneous:
# all speech or all silence, decided by this absolute level.
HOMOGENEOUS_SPEECH_FLOOR_DB = -45.0

# Passage-task exclusion thresholds (strict >); chosen by inspection of
# production data, applied to the passage reading only.
BAMBOO_MAX_SPEAKING_RATE = 250.0
BAMBOO_MAX_ARTICULATION_RATE = 350.0
BAMBOO_MAX_PPT = 80.0


@dataclass(frozen=True)
class SpeechSegmentation:
    """Sorted, non-overlapping speech intervals in seconds."""

    segments: tuple[tuple[float, float], ...]

    @property
    def total_span(self) -> float:
        """First onset to last offset."""
        return self.segments[-1][1] - self.segments[0][0]

    @property
    def articulation_time(self) -> float:
        return float(sum(e - s for s, e in self.segments))


@dataclass(frozen=True)
class TimingMetrics:
    speaking_duration: float
    articulation_duration: float
    speaking_rate: float
    articulation_rate: float
    ppt: float


@dataclass(frozen=True)
class Exclusion:
    """Outlier-filter verdict: which rule fired, with the offending value."""

    reason: str  # "speaking_rate" | "articulation_rate" | "ppt"
    value: float
    threshold: float


def _frame_energies_db(clip: AudioClip) -> tuple[np.ndarray, int, int]:
    sr = clip.sample_rate
    frame = int(round(VAD_FRAME * sr))
    hop = int(round(VAD_HOP * sr))
    n = len(clip.samples)
    if n < frame:
        raise ClipTooShort("clip shorter than one VAD frame")
    starts = np.arange(0, n - frame + 1, hop)
    energies = np.empty(len(starts))
    for i, s in enumerate(starts):
        seg = clip.samples[s : s + frame]
        energies[i] = 10.0 * np.log10(np.mean(seg * seg) + 1e-10)
    return energies, frame, hop


def detect_speech(clip: AudioClip,
                  margin_db: float = VAD_MARGIN_DB,
                  min_pause: float = MIN_PAUSE,
                  min_speech: float = MIN_SPEECH) -> SpeechSegmentation:
    """Adaptive energy VAD: threshold = noise floor plus margin.

    Pauses shorter than min_pause are merged into speech; speech runs
    shorter than min_speech are dropped.
    """
    if clip.duration < 0.5:
        raise ClipTooShort(f"VAD needs >= 0.5 s, got {clip.duration:.3f} s")
    energies, frame, hop = _frame_energies_db(clip)
    sr = clip.sample_rate
    lo = float(np.percentile(energies, 5))
    hi = float(np.percentile(energies, 95))

    if hi - lo < margin_db:
        if hi > HOMOGENEOUS_SPEECH_FLOOR_DB:
            return SpeechSegmentation(segments=((0.0, clip.duration),))
        raise NoSpeechDetected("clip is uniformly below the speech floor")

    mask = energies > lo + margin_db

    # merge short pauses
    max_gap = int(round(min_pause / VAD_HOP))
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        raise NoSpeechDetected("no frames above the adaptive threshold")
    runs: list[list[int]] = [[idx[0], idx[0]]]
    for i in idx[1:]:
        if i - runs[-1][1] - 1 <= max_gap:
            runs[-1][1] = i
        else:
            runs.append([i, i])

    min_len = min_speech
    segments = []
    for a, b in runs:
        start = a * hop / sr
        end = min((b * hop + frame) / sr, clip.duration)
        if end - start >= min_len:
            segments.append((start, end))
    if not segments:
        raise NoSpeechDetected("all speech runs shorter than the minimum")
    return SpeechSegmentation(segments=tuple(segments))


def timing_metrics(seg: SpeechSegmentation, expected_words: int) -> TimingMetrics:
    """Durations, expected-word rates, and percent pause time."""
    if expected_words <= 0:
        raise ValueError(f"expected_words must be positive, got {expected_words}")
    if not seg.segments:
        raise NoSpeechDetected("segmentation has no speech segments")
    speaking = seg.total_span
    articulation = seg.articulation_time
    return TimingMetrics(
        speaking_duration=speaking,
        articulation_duration=articulation,
        speaking_rate=60.0 * expected_words / speaking,
        articulation_rate=60.0 * expected_words / articulation,
        ppt=100.0 * (speaking - articulation) / speaking,
    )


def apply_outlier_filter(metrics: TimingMetrics, task) -> TimingMetrics | Exclusion:
    """Screen passage-task readings with implausible expected-word rates.

    Applies to the passage (bamboo) task only; other tasks pass through.
    """
    if getattr(task, "kind", task) != "bamboo":
        return metrics
    if metrics.speaking_rate > BAMBOO_MAX_SPEAKING_RATE:
        return Exclusion("speaking_rate", metrics.speaking_rate, BAMBOO_MAX_SPEAKING_RATE)
    if metrics.articulation_rate > BAMBOO_MAX_ARTICULATION_RATE:
        return Exclusion("articulation_rate", metrics.articulation_rate,
                         BAMBOO_MAX_ARTICULATION_RATE)
    if metrics.ppt > BAMBOO_MAX_PPT:
        return Exclusion("ppt", metrics.ppt, BAMBOO_MAX_PPT)
    return metrics

"""Canonical metric names, units, and acoustic/visual categorization.

The extract stage emits exactly these names; analysis layers tag features
by category when reporting.
"""

from __future__ import annotations

from .facial import FACIAL_METRIC_NAMES

ACOUSTIC_UNITS: dict[str, str] = {
    "mean_f0": "Hz",
    "jitter": "%",
    "shimmer": "%",
    "hnr": "dB",
    "cpp": "dB",
    "speech_intensity": "dB",
    "speaking_duration": "s",
    "articulation_duration": "s",
    "speaking_rate": "words/min",
    "articulation_rate": "words/min",
    "ppt": "%",
    "syllable_rate": "syllables/s",
    "syllable_count": "count",
    "ctv": "s",
}

FACIAL_UNITS: dict[str, str] = {
    name: ("1/s" if name == "eye_blinks" else "normalized")
    for name in FACIAL_METRIC_NAMES
}

ALL_METRIC_NAMES: tuple[str, ...] = tuple(ACOUSTIC_UNITS) + FACIAL_METRIC_NAMES

# acoustic metrics produced per task type
TASK_METRICS: dict[str, tuple[str, ...]] = {
    "held_vowel": ("mean_f0", "jitter", "shimmer", "hnr", "cpp",
                   "speech_intensity"),
    "sit": ("speaking_duration", "articulation_duration", "speaking_rate",
            "articulation_rate", "ppt", "speech_intensity"),
    "bamboo": ("speaking_duration", "articulation_duration", "speaking_rate",
               "articulation_rate", "ppt", "speech_intensity"),
    "ddk": ("speaking_duration", "articulation_duration", "syllable_rate",
            "syllable_count", "ctv", "speech_intensity"),
}


def metric_unit(name: str) -> str:
    if name in ACOUSTIC_UNITS:
        return ACOUSTIC_UNITS[name]
    if name in FACIAL_UNITS:
        return FACIAL_UNITS[name]
    # per-task duration variants keep the base unit
    for base in ("speaking_duration", "articulation_duration"):
        if name.startswith(base + "_"):
            return ACOUSTIC_UNITS[base]
    raise KeyError(f"unknown metric: {name}")


def metric_category(name: str) -> str:
    """"acoustic" or "visual"; per-task duration variants stay acoustic."""
    return "visual" if name in FACIAL_UNITS else "acoustic"

"""Synthetic session fixtures with known ground truth.

Scenarios:

* ``vowel-jitter``      -- a sustained-vowel WAV with planted jitter/shimmer;
* ``ddk-train``         -- a syllable burst train with planted cycle spread;
* ``landmark-motion``   -- an animated landmark track with analytic paths;
* ``cohort-separation`` -- a three-cohort dataset with planted group shifts
  and a planted severity model inside each patient cohort.

Every scenario writes WAV / landmark CSV / manifest files plus a
``truth.json`` recording the planted parameter values, and is fully
deterministic given the seed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, save_wav
from .errors import UnknownScenario
from .facial import LandmarkTrack, save_landmarks
from .sessions import (
    DEFAULT_SIT_WORDS,
    BAMBOO_WORDS,
    SessionManifest,
    SubjectProfile,
    Sex,
    TaskKind,
    Utterance,
    save_manifest,
    score_alsfrs,
)

VOWEL_SR = 48000
SPEECH_SR = 16000


# --------------------------------------------------------------------------
# audio generators
# --------------------------------------------------------------------------

def pulse_events(f0: float, duration: float, jitter_pct: float = 0.0,
                 shimmer_pct: float = 0.0, seed: int = 0,
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Pulse times and amplitudes with planted cycle perturbations.

    Period and amplitude perturbations are uniform; the scale factors below
    make the planted percentages match the local jitter/shimmer definitions
    in expectation (E|U - V| = 2/3 for U, V ~ Uniform(-1, 1)).
    """
    rng = np.random.default_rng(seed)
    t0 = 1.0 / f0
    delta = 1.5 * jitter_pct / 100.0
    eps = 1.5 * shimmer_pct / 100.0
    times, amps = [], []
    tc = 0.02
    while tc < duration - 0.02:
        times.append(tc)
        amps.append(1.0 + eps * rng.uniform(-1.0, 1.0))
        tc += t0 * (1.0 + delta * rng.uniform(-1.0, 1.0))
    return np.asarray(times), np.asarray(amps)


def realized_jitter_pct(times: np.ndarray) -> float:
    periods = np.diff(times)
    return float(100.0 * np.mean(np.abs(np.diff(periods))) / np.mean(periods))


def render_pulses(times: np.ndarray, amps: np.ndarray, duration: float,
                  sr: int = VOWEL_SR, noise_rms: float = 0.0,
                  seed: int = 0) -> AudioClip:
    width = 0.0025
    x = np.zeros(int(duration * sr))
    for tc, amp in zip(times, amps):
        lo = max(0, int((tc - width) * sr))
        hi = min(len(x), int((tc + width) * sr) + 1)
        ts = np.arange(lo, hi) / sr
        x[lo:hi] += amp * 0.5 * (1.0 + np.cos(np.pi * (ts - tc) / width)) * (
            np.abs(ts - tc) <= width)
    x = 0.9 * x / np.max(np.abs(x))
    if noise_rms > 0:
        x = x + np.random.default_rng(seed).normal(0.0, noise_rms, len(x))
    return AudioClip(samples=x, sample_rate=sr)


def pulse_train(f0: float, duration: float, sr: int = VOWEL_SR,
                jitter_pct: float = 0.0, shimmer_pct: float = 0.0,
                noise_rms: float = 0.0, seed: int = 0) -> AudioClip:
    """Glottal-pulse-like train with planted cycle perturbations."""
    times, amps = pulse_events(f0, duration, jitter_pct, shimmer_pct, seed)
    return render_pulses(times, amps, duration, sr, noise_rms, seed)


def _speechlike(n: int, sr: int) -> np.ndarray:
    t = np.arange(n) / sr
    carrier = (0.5 * np.sin(2 * np.pi * 190.0 * t)
               + 0.25 * np.sin(2 * np.pi * 380.0 * t)
               + 0.12 * np.sin(2 * np.pi * 570.0 * t))
    am = 0.7 + 0.3 * np.sin(2 * np.pi * 3.1 * t)
    return carrier * am


def reading_audio(total_span: float, pause_fraction: float,
                  sr: int = SPEECH_SR, lead: float = 0.3,
                  noise_rms: float = 0.002, seed: int = 0) -> AudioClip:
    """Speech-like signal with the requested span and pause fraction.

    Pauses are sized above the VAD merge threshold so the segmentation
    reproduces the planted speaking/articulation durations.
    """
    pause_total = pause_fraction * total_span
    n_pauses = max(1, int(pause_total / 0.45)) if pause_total > 0.25 else 0
    speech_total = total_span - pause_total
    n_blocks = n_pauses + 1
    block = speech_total / n_blocks
    pause = pause_total / n_pauses if n_pauses else 0.0

    x = np.zeros(int((total_span + 2 * lead) * sr))
    cursor = lead
    for b in range(n_blocks):
        a = int(cursor * sr)
        z = int((cursor + block) * sr)
        x[a:z] = _speechlike(z - a, sr)
        cursor += block + pause
    x = 0.6 * x + np.random.default_rng(seed).normal(0.0, noise_rms, len(x))
    return AudioClip(samples=x, sample_rate=sr)


def ddk_audio(n_bursts: int = 15, mean_gap: float = 0.2,
              gap_sigma: float = 0.0, sr: int = SPEECH_SR,
              lead: float = 0.3, seed: int = 0, burst_sigma: float = 0.030,
              noise_rms: float = 0.003) -> tuple[AudioClip, np.ndarray]:
    """Burst train for the syllable-repetition task; returns (clip, burst times).

    A small noise floor keeps the adaptive VAD threshold realistic so the
    detected span tracks the burst span instead of the Gaussian tails.
    """
    rng = np.random.default_rng(seed)
    times = [lead + 0.1]
    for _ in range(n_bursts - 1):
        gap = mean_gap + (rng.normal(0.0, gap_sigma) if gap_sigma > 0 else 0.0)
        times.append(times[-1] + max(0.12, gap))
    times = np.asarray(times)
    duration = times[-1] + 0.1 + lead
    t = np.arange(int(duration * sr)) / sr
    env = np.zeros(len(t))
    for tc in times:
        env += np.exp(-0.5 * ((t - tc) / burst_sigma) ** 2)
    x = env * np.sin(2 * np.pi * 180.0 * t)
    x = 0.8 * x / np.max(np.abs(x)) + rng.normal(0.0, noise_rms, len(t))
    return AudioClip(samples=x, sample_rate=sr), times


# --------------------------------------------------------------------------
# landmark generator
# --------------------------------------------------------------------------

def base_face() -> np.ndarray:
    """Canonical neutral 68-point face in a 200x200 pixel box."""
    pts = np.zeros((68, 2))
    for i in range(17):  # jaw arc, chin at index 8
        pts[i] = (100 - 62 * np.cos(i * np.pi / 16),
                  80 + 92 * np.sin(i * np.pi / 16))
    arc = [0, 3, 4, 3, 0]
    for k in range(5):
        pts[17 + k] = (55 + 9 * k, 62 - arc[k])
        pts[22 + k] = (109 + 9 * k, 62 - arc[k])
    pts[27], pts[28] = (100, 80), (100, 92)
    pts[29], pts[30] = (100, 104), (100, 112)
    for k, x in enumerate([88, 94, 100, 106, 112]):
        pts[31 + k] = (x, 120 + (2 if k in (1, 2, 3) else 0))
    pts[36], pts[37], pts[38] = (62, 80), (70, 75), (80, 75)
    pts[39], pts[40], pts[41] = (88, 80), (80, 85), (70, 85)
    pts[42], pts[43], pts[44] = (112, 80), (120, 75), (130, 75)
    pts[45], pts[46], pts[47] = (138, 80), (130, 85), (120, 85)
    outer = [(76, 140), (84, 134), (93, 131), (100, 130), (107, 131),
             (116, 134), (124, 140), (116, 148), (107, 152), (100, 153),
             (93, 152), (84, 148)]
    for k, xy in enumerate(outer):
        pts[48 + k] = xy
    inner = [(82, 140), (91, 137), (100, 136), (109, 137), (118, 140),
             (109, 143), (100, 144), (91, 143)]
    for k, xy in enumerate(inner):
        pts[60 + k] = xy
    return pts


def landmark_motion_track(duration: float = 10.0, fps: float = 30.0,
                          jc_amp: float = 6.0, jc_freq: float = 0.8,
                          open_amp: float = 6.0, open_freq: float = 1.2,
                          blink_rate: float = 0.2, eyelid_scale: float = 1.0,
                          scale: float = 1.0, translate=(0.0, 0.0),
                          invalid_frames=()) -> tuple[LandmarkTrack, dict]:
    """Animated face track plus its analytic ground truth.

    The jaw oscillates vertically with amplitude jc_amp; the mouth opens by
    0.9*open_amp at the lower lip; blinks close the eyes for 3 frames each,
    spaced evenly.  eyelid_scale sets the static eye opening independently
    of the blink count.
    """
    n = int(round(duration * fps))
    t = np.arange(n) / fps
    face = base_face()
    lid = 5.0 * (1.0 - eyelid_scale)  # base eyelid gap is 10 px
    face[[37, 38, 43, 44], 1] += lid
    face[[40, 41, 46, 47], 1] -= lid
    jc_dy = jc_amp * np.sin(2 * np.pi * jc_freq * t)
    mouth = open_amp * 0.5 * (1.0 - np.cos(2 * np.pi * open_freq * t))

    n_blinks = int(round(blink_rate * duration))
    blink_frames: set[int] = set()
    for j in range(n_blinks):
        center = int((j + 0.5) * n / n_blinks)
        blink_frames.update(range(max(0, center - 1), min(n, center + 2)))

    frames = np.empty((n, 68, 2))
    for i in range(n):
        pts = face.copy()
        pts[4:13, 1] += jc_dy[i]
        o = mouth[i]
        pts[49:54, 1] -= 0.1 * o
        pts[55:60, 1] += 0.9 * o
        pts[61:64, 1] -= 0.15 * o
        pts[65:68, 1] += 0.75 * o
        if i in blink_frames:
            close = 4.2 * eyelid_scale
            pts[[37, 38, 43, 44], 1] += close
            pts[[40, 41, 46, 47], 1] -= close
        frames[i] = pts * scale + np.asarray(translate)

    valid = np.ones(n, dtype=bool)
    for i in invalid_frames:
        valid[i] = False
    track = LandmarkTrack(frames=frames, fps=fps, valid=valid)

    ild = 24.0 * scale
    truth = {
        "ild_px": ild,
        "jc_path": float(np.sum(np.abs(np.diff(jc_dy * scale))) / ild),
        "ll_path": float(np.sum(np.abs(np.diff(0.9 * mouth * scale))) / ild),
        "open_avg": float(np.mean(8.0 + 0.9 * mouth) * scale / ild),
        "open_max": float(np.max(8.0 + 0.9 * mouth) * scale / ild),
        "n_blinks": n_blinks,
        "blink_rate": n_blinks / duration,
    }
    return track, truth


# --------------------------------------------------------------------------
# scenarios
# --------------------------------------------------------------------------

def _control_profile(subject_id: str, sex: Sex = Sex.FEMALE,
                     age: float = 42.0) -> SubjectProfile:
    return SubjectProfile(subject_id=subject_id, sex=sex, age=age,
                          is_control=True, alsfrs=score_alsfrs([4] * 12))


def _write_truth(outdir: Path, truth: dict) -> Path:
    path = outdir / "truth.json"
    path.write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    return path


def _scenario_vowel_jitter(outdir: Path, seed: int, params: dict) -> dict:
    jitter = float(params.get("jitter_pct", 2.0))
    shimmer = float(params.get("shimmer_pct", 5.0))
    f0 = float(params.get("f0", 110.0))
    clip = pulse_train(f0, 2.0, VOWEL_SR, jitter_pct=jitter,
                       shimmer_pct=shimmer, seed=seed)
    save_wav(outdir / "vowel.wav", clip)
    manifest = SessionManifest(
        subject=_control_profile("synth-vowel"),
        utterances=(Utterance(TaskKind("held_vowel"), "vowel.wav", "u01"),),
    )
    save_manifest(outdir / "manifest.json", manifest)
    truth = {"scenario": "vowel-jitter", "seed": seed, "f0": f0,
             "planted_jitter_pct": jitter, "planted_shimmer_pct": shimmer}
    _write_truth(outdir, truth)
    return {"manifests": [str(outdir / "manifest.json")], "truth": truth}


def _scenario_ddk_train(outdir: Path, seed: int, params: dict) -> dict:
    rate = float(params.get("rate_hz", 5.0))
    sigma = float(params.get("ctv_s", 0.0))
    n = int(params.get("n_bursts", 15))
    clip, times = ddk_audio(n_bursts=n, mean_gap=1.0 / rate, gap_sigma=sigma,
                            seed=seed)
    save_wav(outdir / "ddk.wav", clip)
    manifest = SessionManifest(
        subject=_control_profile("synth-ddk"),
        utterances=(Utterance(TaskKind("ddk"), "ddk.wav", "u01"),),
    )
    save_manifest(outdir / "manifest.json", manifest)
    gaps = np.diff(times)
    truth = {"scenario": "ddk-train", "seed": seed, "n_bursts": n,
             "rate_hz": rate, "planted_ctv_s": sigma,
             "realized_gap_sd_s": float(np.std(gaps, ddof=1)),
             "burst_times_s": [float(v) for v in times]}
    _write_truth(outdir, truth)
    return {"manifests": [str(outdir / "manifest.json")], "truth": truth}


def _scenario_landmark_motion(outdir: Path, seed: int, params: dict) -> dict:
    track, truth = landmark_motion_track(
        jc_amp=float(params.get("jc_amp", 6.0)),
        open_amp=float(params.get("open_amp", 6.0)),
        blink_rate=float(params.get("blink_rate", 0.2)),
    )
    save_landmarks(outdir / "face.csv", track)
    save_wav(outdir / "carrier.wav",
             reading_audio(total_span=9.0, pause_fraction=0.0))
    manifest = SessionManifest(
        subject=_control_profile("synth-face"),
        utterances=(Utterance(TaskKind("held_vowel"), "carrier.wav", "u01",
                              landmark_path="face.csv"),),
    )
    save_manifest(outdir / "manifest.json", manifest)
    truth = {"scenario": "landmark-motion", "seed": seed, **truth}
    _write_truth(outdir, truth)
    return {"manifests": [str(outdir / "manifest.json")], "truth": truth}


# cohort bases: [CON, PRE, BUL]
_COHORT_BASES = {
    "rate_wpm": (195.0, 172.0, 132.0),
    "pause_frac": (0.12, 0.16, 0.32),
    "jitter_pct": (0.8, 1.5, 3.0),
    "ctv_s": (0.012, 0.025, 0.055),
    "blink_hz": (0.25, 0.32, 0.62),
    "jc_amp": (7.0, 6.0, 2.8),
    "open_amp": (7.0, 6.2, 3.2),
    "ddk_gap": (0.200, 0.220, 0.270),
}
_SEVERITY_GAIN = {"jitter_pct": 0.25, "ctv_s": 0.012, "blink_hz": 0.05}

PLANTED_CONTRAST_METRICS = {
    "jitter": "+", "ctv": "+", "eye_blinks": "+",
    "speaking_rate": "-", "ppt": "+",
}
PLANTED_REGRESSION_METRICS = ("jitter", "ctv", "eye_blinks")


def _nonbulbar_items(budget: int) -> list[int]:
    """Deterministically spread a 0..36 budget over nine 0..4 items."""
    items = []
    remaining = budget
    for i in range(9):
        slots_left = 8 - i
        v = min(4, max(0, remaining - 4 * slots_left))
        items.append(v)
        remaining -= v
    return items


def _scenario_cohort_separation(outdir: Path, seed: int, params: dict) -> dict:
    sizes = {"CON": int(params.get("n_con", 14)),
             "PRE": int(params.get("n_pre", 16)),
             "BUL": int(params.get("n_bul", 16))}
    rng = np.random.default_rng(seed)
    manifests: list[str] = []
    per_subject: dict[str, dict] = {}
    cohort_order = ("CON", "PRE", "BUL")

    for cohort in cohort_order:
        col = cohort_order.index(cohort)
        for k in range(sizes[cohort]):
            sid = f"{cohort.lower()}{k:03d}"
            sex = Sex.FEMALE if k % 2 == 0 else Sex.MALE
            sdir = outdir / sid
            sdir.mkdir(parents=True, exist_ok=True)

            if cohort == "CON":
                sev, u = 0.0, np.zeros(3)
            else:
                sev = float(rng.normal())
                u = rng.normal(size=3)
            jitter = max(0.2, _COHORT_BASES["jitter_pct"][col]
                         + _SEVERITY_GAIN["jitter_pct"] * (sev + u[0]))
            ctv = max(0.004, _COHORT_BASES["ctv_s"][col]
                      + _SEVERITY_GAIN["ctv_s"] * (sev + u[1]))
            blink = float(np.clip(_COHORT_BASES["blink_hz"][col]
                                  + _SEVERITY_GAIN["blink_hz"] * (sev + u[2]),
                                  0.1, 1.4))
            if cohort == "CON":
                jitter = max(0.2, jitter + 0.2 * rng.normal())
                ctv = max(0.004, ctv + 0.006 * rng.normal())
                blink = float(np.clip(blink + 0.06 * rng.normal(), 0.1, 1.4))

            rate = _COHORT_BASES["rate_wpm"][col] + 8.0 * rng.normal()
            phi = float(np.clip(_COHORT_BASES["pause_frac"][col]
                                + 0.03 * rng.normal(), 0.06, 0.5))
            f0 = 118.0 + 8.0 * rng.normal()
            shimmer = 3.0 + 2.0 * rng.random()
            # wide independent noise spread dominates HNR/CPP so voice
            # quality proxies do not shadow the planted severity features
            noise_rms = 0.006 + 0.03 * rng.random()
            jc_amp = max(0.8, _COHORT_BASES["jc_amp"][col] * (1 + 0.12 * rng.normal()))
            open_amp = max(0.8, _COHORT_BASES["open_amp"][col] * (1 + 0.12 * rng.normal()))
            ddk_gap = _COHORT_BASES["ddk_gap"][col] + 0.008 * rng.normal()

            seed_k = int(rng.integers(0, 2**31 - 1))
            times, amps = pulse_events(f0, 2.0, jitter_pct=jitter,
                                       shimmer_pct=shimmer, seed=seed_k)
            save_wav(sdir / "vowel.wav",
                     render_pulses(times, amps, 2.0, VOWEL_SR,
                                   noise_rms=noise_rms, seed=seed_k))
            utts = [Utterance(TaskKind("held_vowel"), "vowel.wav", "u01",
                              landmark_path="face.csv")]
            for si, words in ((1, DEFAULT_SIT_WORDS[1]), (2, DEFAULT_SIT_WORDS[2])):
                rate_s = max(60.0, rate + 5.0 * rng.normal())
                span = 60.0 * words / rate_s
                save_wav(sdir / f"sit{si}.wav",
                         reading_audio(span, min(phi, 0.3) if span > 1.6 else 0.0))
                utts.append(Utterance(TaskKind("sit", si), f"sit{si}.wav",
                                      f"u0{si + 1}"))
            span_b = 60.0 * BAMBOO_WORDS / rate
            save_wav(sdir / "bamboo.wav", reading_audio(span_b, phi))
            utts.append(Utterance(TaskKind("bamboo"), "bamboo.wav", "u04"))
            ddk_clip, burst_times = ddk_audio(mean_gap=ddk_gap, gap_sigma=ctv,
                                              seed=seed_k)
            save_wav(sdir / "ddk.wav", ddk_clip)
            utts.append(Utterance(TaskKind("ddk"), "ddk.wav", "u05"))
            track, lm_truth = landmark_motion_track(jc_amp=jc_amp,
                                                    open_amp=open_amp,
                                                    blink_rate=blink)
            save_landmarks(sdir / "face.csv", track)

            # severity target built from the realized planted quantities so
            # it is exactly linear in what the recordings actually contain
            jitter_real = realized_jitter_pct(times)
            ctv_real = float(np.std(np.diff(burst_times), ddof=1))
            blink_real = float(lm_truth["blink_rate"])
            y_plant = ((jitter_real - _COHORT_BASES["jitter_pct"][col]) / _SEVERITY_GAIN["jitter_pct"]
                       + (ctv_real - _COHORT_BASES["ctv_s"][col]) / _SEVERITY_GAIN["ctv_s"]
                       + (blink_real - _COHORT_BASES["blink_hz"][col]) / _SEVERITY_GAIN["blink_hz"])
            if cohort == "CON":
                items = [4] * 12
            elif cohort == "PRE":
                total = int(np.clip(round(38.0 - 2.0 * y_plant), 12, 48))
                items = [4, 4, 4] + _nonbulbar_items(total - 12)
            else:
                total = int(np.clip(round(27.0 - 2.2 * y_plant), 9, 43))
                items = [3, 3, 3] + _nonbulbar_items(total - 9)

            profile = SubjectProfile(
                subject_id=sid, sex=sex,
                age=44.0 if cohort == "CON" else 58.0,
                is_control=cohort == "CON",
                alsfrs=score_alsfrs(items),
            )
            save_manifest(sdir / "manifest.json",
                          SessionManifest(subject=profile, utterances=tuple(utts)))
            manifests.append(str(sdir / "manifest.json"))
            per_subject[sid] = {
                "cohort": cohort, "jitter_pct": jitter, "ctv_s": ctv,
                "blink_hz": blink, "rate_wpm": rate, "pause_frac": phi,
                "jitter_realized": jitter_real, "ctv_realized": ctv_real,
                "blink_realized": blink_real, "alsfrs_total": sum(items),
            }

    truth = {
        "scenario": "cohort-separation",
        "seed": seed,
        "sizes": sizes,
        "planted_contrast_metrics": PLANTED_CONTRAST_METRICS,
        "planted_regression_metrics": list(PLANTED_REGRESSION_METRICS),
        "per_subject": per_subject,
    }
    _write_truth(outdir, truth)
    return {"manifests": manifests, "truth": truth}


_SCENARIOS = {
    "vowel-jitter": _scenario_vowel_jitter,
    "ddk-train": _scenario_ddk_train,
    "landmark-motion": _scenario_landmark_motion,
    "cohort-separation": _scenario_cohort_separation,
}


def synth_scenario(scenario: str, outdir, seed: int = 0,
                   params: dict | None = None) -> dict:
    """Generate one scenario's fixture files under outdir."""
    if scenario not in _SCENARIOS:
        raise UnknownScenario(
            f"unknown scenario {scenario!r}; choose from {sorted(_SCENARIOS)}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    result = _SCENARIOS[scenario](outdir, seed, params or {})
    result["scenario"] = scenario
    result["outdir"] = str(outdir)
    result["truth_path"] = str(outdir / "truth.json")
    return result

"""Held-vowel phonatory metrics: F0, jitter, shimmer, HNR, CPP, intensity.

F0 tracking uses short-term autocorrelation (40 ms rectangular frames,
10 ms hop, mean-subtracted, length-unbiased normalization) with parabolic
peak interpolation.  A frame is voiced when its strongest autocorrelation
peak reaches the voicing threshold and the implied F0 lies inside the
configured search band.  Among near-equal peaks the smallest lag wins,
which guards against octave errors on strongly periodic signals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .audio_io import AudioClip
from .errors import (
    ClipTooShort,
    DegenerateSignal,
    InsufficientVoicing,
    NonPositiveAmplitude,
    NoSpeechSegments,
    TooFewAmplitudes,
    TooFewPeriods,
)

DEFAULT_F_MIN = 60.0
DEFAULT_F_MAX = 400.0
DEFAULT_VOICING_THRESHOLD = 0.45
FRAME_WINDOW = 0.040
FRAME_HOP = 0.010

# Upper bound of the lag search; candidate periods shorter than this are
# still examined so that a fundamental above f_max is recognised (and the
# frame flagged unvoiced) instead of being mistaken for its subharmonic.
_SEARCH_CEILING_HZ = 1000.0

# Peaks within 1% of the frame's best peak count as ties; smallest lag wins.
_PEAK_TIE_RTOL = 0.99

# Intensity is uncalibrated dB relative to full scale plus this fixed offset
# (pseudo-SPL); flagged in output metadata.
INTENSITY_OFFSET_DB = 90.0


@dataclass(frozen=True)
class F0Contour:
    """Per-frame F0 in Hz; unvoiced frames are NaN."""

    frame_times: np.ndarray
    f0_values: np.ndarray
    frame_hop: float
    f_min: float
    f_max: float

    @property
    def voiced_mask(self) -> np.ndarray:
        return ~np.isnan(self.f0_values)

    @property
    def mean_f0(self) -> float:
        voiced = self.f0_values[self.voiced_mask]
        if voiced.size == 0:
            raise InsufficientVoicing("contour has no voiced frames")
        return float(np.mean(voiced))


@dataclass(frozen=True)
class PhonationMetrics:
    mean_f0: float
    jitter_local: float
    shimmer_local: float
    hnr: float
    cpp: float


def _parabolic(y_m1: float, y_0: float, y_p1: float) -> tuple[float, float]:
    """Vertex offset in [-0.5, 0.5] and refined value of a 3-point parabola."""
    denom = y_m1 - 2.0 * y_0 + y_p1
    if abs(denom) < 1e-30:
        return 0.0, y_0
    delta = 0.5 * (y_m1 - y_p1) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    value = y_0 - 0.25 * (y_m1 - y_p1) * delta
    return delta, float(value)


def _frame_starts(n_samples: int, sr: int) -> tuple[np.ndarray, int, int]:
    win = int(round(FRAME_WINDOW * sr))
    hop = int(round(FRAME_HOP * sr))
    if n_samples < win:
        raise ClipTooShort(f"clip of {n_samples} samples shorter than one analysis frame")
    starts = np.arange(0, n_samples - win + 1, hop)
    return starts, win, hop


def _normalized_acf(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalized cross-correlation of a frame with itself for lags 0..max_lag.

    Per-lag energy normalization (RAPT-style) keeps the value at the true
    period near 1 regardless of how many cycles the frame holds, and avoids
    the peak tilt that frame-mean subtraction induces on plain
    autocorrelation.
    """
    x = frame - frame.mean()
    n = len(x)
    if np.dot(x, x) / n < 1e-16:
        return np.zeros(max_lag + 1)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, nfft)
    raw = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1]
    sq = np.concatenate([[0.0], np.cumsum(x * x)])
    lags = np.arange(max_lag + 1)
    head = sq[n - lags] - sq[0]  # energy of x[0 : n-lag]
    tail = sq[n] - sq[lags]      # energy of x[lag : n]
    denom = np.sqrt(head * tail)
    out = np.zeros(max_lag + 1)
    ok = denom > 1e-30
    out[ok] = raw[ok] / denom[ok]
    return out


def _best_period_peak(acf: np.ndarray, lag_floor: int, lag_ceil: int,
                      ) -> tuple[float, float] | None:
    """Strongest autocorrelation peak as (refined lag, refined value).

    Among peaks within 1% of the best value the smallest lag is chosen.
    """
    hi = min(lag_ceil, len(acf) - 2)
    if hi <= lag_floor + 1:
        return None
    seg = acf[lag_floor : hi + 1]
    is_peak = (seg[1:-1] > seg[:-2]) & (seg[1:-1] >= seg[2:])
    peak_lags = np.nonzero(is_peak)[0] + lag_floor + 1
    if peak_lags.size == 0:
        return None
    values = acf[peak_lags]
    best = values.max()
    if best <= 0:
        return None
    chosen = peak_lags[values >= best * _PEAK_TIE_RTOL].min()
    delta, value = _parabolic(acf[chosen - 1], acf[chosen], acf[chosen + 1])
    return chosen + delta, value


def estimate_f0(clip: AudioClip, f_min: float = DEFAULT_F_MIN,
                f_max: float = DEFAULT_F_MAX,
                voicing_threshold: float = DEFAULT_VOICING_THRESHOLD) -> F0Contour:
    """Track per-frame F0; frames without a credible period are NaN."""
    if not f_min < f_max:
        raise ValueError(f"need f_min < f_max, got {f_min} >= {f_max}")
    if clip.duration <= 2.0 / f_min:
        raise ClipTooShort(
            f"clip of {clip.duration:.3f}s too short for f_min {f_min} Hz")
    sr = clip.sample_rate
    starts, win, hop = _frame_starts(len(clip.samples), sr)
    lag_floor = max(2, int(sr / _SEARCH_CEILING_HZ))
    lag_ceil = int(np.ceil(sr / f_min)) + 2
    max_lag = min(lag_ceil + 2, win - 1)

    times = (starts + win / 2.0) / sr
    f0 = np.full(len(starts), np.nan)
    for i, s in enumerate(starts):
        acf = _normalized_acf(clip.samples[s : s + win], max_lag)
        peak = _best_period_peak(acf, lag_floor, lag_ceil)
        if peak is None:
            continue
        lag, strength = peak
        if strength < voicing_threshold:
            continue
        cand = sr / lag
        if f_min <= cand <= f_max:
            f0[i] = cand
    return F0Contour(frame_times=times, f0_values=f0, frame_hop=FRAME_HOP,
                     f_min=f_min, f_max=f_max)


def _longest_voiced_run(contour: F0Contour) -> tuple[int, int]:
    """Start (inclusive) and end (exclusive) frame indices of the longest run."""
    mask = contour.voiced_mask
    best_start, best_len = 0, 0
    i = 0
    n = len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j < n and mask[j]:
                j += 1
            if j - i > best_len:
                best_start, best_len = i, j - i
            i = j
        else:
            i += 1
    return best_start, best_start + best_len


def period_sequence(clip: AudioClip, contour: F0Contour,
                    ) -> list[tuple[float, float]]:
    """Consecutive glottal-cycle estimates over the longest voiced stretch.

    Returns (period length in seconds, peak amplitude) per cycle, where the
    amplitude belongs to the pulse closing the cycle.  Peak positions and
    heights are refined by parabolic interpolation for sub-sample accuracy.
    """
    lo, hi = _longest_voiced_run(contour)
    if hi - lo < 3:
        raise InsufficientVoicing("need at least 3 consecutive voiced frames")
    sr = clip.sample_rate
    half_win = FRAME_WINDOW / 2.0
    a = max(0, int((contour.frame_times[lo] - half_win) * sr))
    b = min(len(clip.samples), int(np.ceil((contour.frame_times[hi - 1] + half_win) * sr)))
    stretch = clip.samples[a:b]
    t_med = 1.0 / float(np.median(contour.f0_values[lo:hi]))

    sig = stretch if stretch.max() >= -stretch.min() else -stretch
    top = sig.max()
    if top <= 0:
        raise InsufficientVoicing("voiced stretch has no positive peaks")
    idx, _ = find_peaks(sig, distance=max(1, int(0.6 * t_med * sr)), height=0.25 * top)
    if len(idx) < 2:
        raise InsufficientVoicing("fewer than 2 glottal pulses located")

    t_peaks = np.empty(len(idx))
    amps = np.empty(len(idx))
    for k, i in enumerate(idx):
        if 0 < i < len(sig) - 1:
            delta, val = _parabolic(sig[i - 1], sig[i], sig[i + 1])
        else:
            delta, val = 0.0, sig[i]
        t_peaks[k] = (a + i + delta) / sr
        amps[k] = val
    return [(float(t_peaks[k + 1] - t_peaks[k]), float(amps[k + 1]))
            for k in range(len(idx) - 1)]


def jitter_local(periods) -> float:
    """Mean absolute consecutive period difference over mean period, percent."""
    periods = np.asarray(periods, dtype=np.float64)
    if periods.size < 2:
        raise TooFewPeriods(f"need >= 2 periods, got {periods.size}")
    return float(100.0 * np.mean(np.abs(np.diff(periods))) / np.mean(periods))


def shimmer_local(amplitudes) -> float:
    """Mean absolute consecutive amplitude difference over mean amplitude, percent."""
    amps = np.asarray(amplitudes, dtype=np.float64)
    if amps.size < 2:
        raise TooFewAmplitudes(f"need >= 2 amplitudes, got {amps.size}")
    if np.any(amps <= 0):
        raise NonPositiveAmplitude("cycle peak amplitudes must be positive")
    return float(100.0 * np.mean(np.abs(np.diff(amps))) / np.mean(amps))


def hnr(clip: AudioClip, contour: F0Contour) -> float:
    """Harmonics-to-noise ratio in dB, averaged over voiced frames.

    Per frame, the normalized autocorrelation r at the period lag gives
    10*log10(r / (1 - r)).
    """
    mask = contour.voiced_mask
    if not mask.any():
        raise InsufficientVoicing("no voiced frames for HNR")
    sr = clip.sample_rate
    win = int(round(FRAME_WINDOW * sr))
    values = []
    for i in np.nonzero(mask)[0]:
        start = int(round((contour.frame_times[i] - FRAME_WINDOW / 2.0) * sr))
        start = max(0, min(start, len(clip.samples) - win))
        lag = sr / contour.f0_values[i]
        max_lag = min(int(np.ceil(lag)) + 4, win - 1)
        acf = _normalized_acf(clip.samples[start : start + win], max_lag)
        k = int(round(lag))
        k = max(2, min(k, max_lag - 1))
        # local refinement around the expected period lag
        while 2 < k < max_lag - 1 and acf[k + 1] > acf[k]:
            k += 1
        while 2 < k < max_lag - 1 and acf[k - 1] > acf[k]:
            k -= 1
        _, r = _parabolic(acf[k - 1], acf[k], acf[k + 1])
        r = float(np.clip(r, 1e-10, 1.0 - 1e-10))
        values.append(10.0 * np.log10(r / (1.0 - r)))
    return float(np.mean(values))


def cpp(clip: AudioClip, f_min: float = DEFAULT_F_MIN,
        f_max: float = DEFAULT_F_MAX) -> float:
    """Cepstral peak prominence in dB.

    Height of the cepstral peak in the quefrency band [1/f_max, 1/f_min]
    above a linear regression line fit to the cepstrum over that band.  The
    cepstrum is computed once over the whole clip (no time averaging).
    """
    if clip.duration < 0.5:
        raise ClipTooShort(f"CPP needs >= 0.5 s, got {clip.duration:.3f} s")
    x = clip.samples - clip.samples.mean()
    if np.max(np.abs(x)) < 1e-9:
        raise DegenerateSignal("clip is silent")
    sr = clip.sample_rate
    xw = x * np.hanning(len(x))
    nfft = 1 << int(np.ceil(np.log2(len(xw))))
    spec_db = 20.0 * np.log10(np.abs(np.fft.fft(xw, nfft)) + 1e-12)
    ceps_db = 20.0 * np.log10(np.abs(np.fft.fft(spec_db)) / nfft + 1e-12)
    q_lo = int(np.floor(sr / f_max))
    q_hi = int(np.ceil(sr / f_min))
    q_hi = min(q_hi, nfft // 2 - 1)
    band = np.arange(q_lo, q_hi + 1)
    quef = band / sr
    coeffs = np.polyfit(quef, ceps_db[band], 1)
    baseline = np.polyval(coeffs, quef)
    return float(np.max(ceps_db[band] - baseline))


def speech_intensity(clip: AudioClip, speech_segments,
                     offset_db: float = INTENSITY_OFFSET_DB) -> float:
    """Mean energy over speech segments in uncalibrated pseudo-SPL dB."""
    segments = list(speech_segments)
    if not segments:
        raise NoSpeechSegments("no speech segments supplied")
    sr = clip.sample_rate
    parts = []
    for start, end in segments:
        a = max(0, int(start * sr))
        b = min(len(clip.samples), int(np.ceil(end * sr)))
        if b > a:
            parts.append(clip.samples[a:b])
    if not parts:
        raise NoSpeechSegments("speech segments are empty after clamping")
    mean_square = float(np.mean(np.concatenate(parts) ** 2))
    if mean_square <= 0:
        raise DegenerateSignal("segments contain only silence")
    return 10.0 * np.log10(mean_square) + offset_db


def phonation_metrics(clip: AudioClip, f_min: float = DEFAULT_F_MIN,
                      f_max: float = DEFAULT_F_MAX,
                      voicing_threshold: float = DEFAULT_VOICING_THRESHOLD,
                      ) -> PhonationMetrics:
    """Full held-vowel metric bundle."""
    contour = estimate_f0(clip, f_min, f_max, voicing_threshold)
    cycles = period_sequence(clip, contour)
    periods = [p for p, _ in cycles]
    amps = [a for _, a in cycles]
    return PhonationMetrics(
        mean_f0=contour.mean_f0,
        jitter_local=jitter_local(periods),
        shimmer_local=shimmer_local(amps),
        hnr=hnr(clip, contour),
        cpp=cpp(clip, f_min, f_max),
    )

"""Facial metrics from 68-point landmark tracks.

Landmark indexing follows the standard 68-point annotation (0-based):
jaw 0-16 with jaw center 8, brows 17-26, nose 27-35, right eye 36-41,
left eye 42-47, outer lip 48-59, inner lip 60-67.  "Right"/"left" refer to
the subject, so the subject's right eye sits at smaller image x in frontal
video.

All pixel-based outputs are normalized by the inter-lachrymal distance
(squared for areas); blink rate stays in 1/s.  Signed kinematic series use
the vertical image component (positive = downward); *_abs variants use the
2-D magnitude.  Derivatives are central finite differences with one-sided
stencils at run boundaries, and never straddle detection gaps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateContour,
    MissingFile,
    NoValidFrames,
    ParseError,
    TrackGapTooLong,
    TrackTooShort,
)

JAW_CENTER = 8
LOWER_LIP = 57
INNER_LIP_TOP = 62
INNER_LIP_BOTTOM = 66
MOUTH_CORNER_R = 48
MOUTH_CORNER_L = 54
OUTER_LIP = tuple(range(48, 60))
INNER_EYE_CORNER_R = 39
INNER_EYE_CORNER_L = 42
RIGHT_EYE = tuple(range(36, 42))
LEFT_EYE = tuple(range(42, 48))
RIGHT_BROW = tuple(range(17, 22))
LEFT_BROW = tuple(range(22, 27))

EAR_BLINK_THRESHOLD = 0.20
BLINK_DEBOUNCE_FRAMES = 2
MAX_GAP_SECONDS = 0.5

LANDMARK_CSV_HEADER = "frame,time_s,valid," + ",".join(
    f"x{i},y{i}" for i in range(68))

_KINEMATIC_POINTS = {"LL": LOWER_LIP, "JC": JAW_CENTER}
_DERIVATIVE_PREFIXES = ("v", "a", "j")

FACIAL_METRIC_NAMES: tuple[str, ...] = tuple(
    [
        "open_max", "open_avg",
        "width_max", "width_avg",
        "LL_path", "JC_path",
        "eye_open_max", "eye_open_avg",
        "eyebrow_vpos_max", "eyebrow_vpos_avg",
    ]
    + [
        f"{d}{point}{suffix}_{red}"
        for d in _DERIVATIVE_PREFIXES
        for point in ("LL", "JC")
        for suffix in ("", "_abs")
        for red in ("max", "avg", "min")
    ]
    + [
        "S_max", "S_avg",
        "S_R_max", "S_R_avg",
        "S_L_max", "S_L_avg",
        "S_ratio_avg",
        "eye_blinks",
    ]
)


@dataclass(frozen=True)
class LandmarkTrack:
    """Per-frame 68-point 2-D landmark coordinates with validity flags."""

    frames: np.ndarray  # (n, 68, 2) float
    fps: float
    valid: np.ndarray  # (n,) bool

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if frames.ndim != 3 or frames.shape[1:] != (68, 2):
            raise ParseError(f"landmark frames must be (n, 68, 2), got {frames.shape}")
        if valid.shape != (frames.shape[0],):
            raise ParseError("validity mask length must match frame count")
        if self.fps <= 0:
            raise ParseError(f"fps must be positive, got {self.fps}")
        if int(valid.sum()) < 2:
            raise ParseError("track needs at least 2 valid frames")
        if not np.all(np.isfinite(frames[valid])):
            raise ParseError("valid frames contain non-finite coordinates")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "valid", valid)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class KinematicSeries:
    """Position and its finite-difference derivative chain, px/frame^n."""

    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    jerk: np.ndarray


def load_landmarks(path, fps: float | None = None) -> LandmarkTrack:
    """Read the landmark CSV contract; fps from argument or JSON sidecar."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"landmark file not found: {path}")
    if fps is None:
        sidecar = path.with_suffix(".json")
        if not sidecar.is_file():
            raise ParseError(f"fps unknown: no sidecar {sidecar} and no fps argument")
        try:
            fps = float(json.loads(sidecar.read_text())["fps"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad fps sidecar {sidecar}: {exc}") from exc
    lines = path.read_text().strip().splitlines()
    if not lines or lines[0].strip() != LANDMARK_CSV_HEADER:
        raise ParseError(f"unexpected landmark CSV header in {path}")
    n = len(lines) - 1
    frames = np.zeros((n, 68, 2))
    valid = np.zeros(n, dtype=bool)
    for r, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != 3 + 136:
            raise ParseError(f"row {r} of {path} has {len(cells)} cells, expected 139")
        valid[r] = cells[2].strip() not in ("0", "0.0", "false", "False")
        coords = np.array([float(c) for c in cells[3:]])
        frames[r] = coords.reshape(68, 2)
    return LandmarkTrack(frames=frames, fps=fps, valid=valid)


def save_landmarks(path, track: LandmarkTrack) -> None:
    """Write the landmark CSV contract plus the fps sidecar."""
    path = Path(path)
    rows = [LANDMARK_CSV_HEADER]
    for i in range(track.n_frames):
        cells = [str(i), f"{i / track.fps:.6f}", "1" if track.valid[i] else "0"]
        cells += [f"{v:.6f}" for v in track.frames[i].ravel()]
        rows.append(",".join(cells))
    path.write_text("\n".join(rows) + "\n")
    path.with_suffix(".json").write_text(json.dumps({"fps": track.fps}) + "\n")


def interlachrymal_distance(track: LandmarkTrack) -> float:
    """Median distance between the inner eye corners over valid frames, px."""
    pts = track.frames[track.valid]
    if len(pts) == 0:
        raise NoValidFrames("no valid frames for inter-lachrymal distance")
    d = np.linalg.norm(pts[:, INNER_EYE_CORNER_R] - pts[:, INNER_EYE_CORNER_L], axis=1)
    return float(np.median(d))


def derivatives(position) -> KinematicSeries:
    """Velocity, acceleration, and jerk by repeated central differencing."""
    pos = np.asarray(position, dtype=np.float64)
    if pos.shape[0] < 4:
        raise TrackTooShort(f"need >= 4 frames for jerk, got {pos.shape[0]}")
    vel = np.gradient(pos, axis=0)
    acc = np.gradient(vel, axis=0)
    jerk = np.gradient(acc, axis=0)
    return KinematicSeries(position=pos, velocity=vel, acceleration=acc, jerk=jerk)


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _shoelace_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _clip_halfplane(poly: np.ndarray, x_mid: float, keep_le: bool) -> np.ndarray:
    """Sutherland-Hodgman clip against the vertical line x = x_mid."""
    def inside(p):
        return p[0] <= x_mid if keep_le else p[0] >= x_mid

    out = []
    n = len(poly)
    for i in range(n):
        cur, nxt = poly[i], poly[(i + 1) % n]
        cur_in, nxt_in = inside(cur), inside(nxt)
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            t = (x_mid - cur[0]) / (nxt[0] - cur[0])
            out.append(cur + t * (nxt - cur))
    return np.asarray(out) if out else np.empty((0, 2))


@dataclass(frozen=True)
class MouthGeometry:
    open: float
    width: float
    area: float
    area_right: float
    area_left: float


def mouth_geometry(landmarks: np.ndarray) -> MouthGeometry:
    """Lip opening, mouth width, and outer-contour areas for one frame.

    The mouth area is the shoelace area of the outer-lip polygon; the
    right/left halves split it along the vertical line through the midpoint
    of the mouth corners (subject-right = smaller image x).
    """
    pts = np.asarray(landmarks, dtype=np.float64)
    contour = pts[list(OUTER_LIP)]
    n = len(contour)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(i - j) in (1, n - 1):
                continue
            if _segments_properly_intersect(contour[i], contour[(i + 1) % n],
                                            contour[j], contour[(j + 1) % n]):
                raise DegenerateContour("outer lip contour self-intersects")
    area = _shoelace_area(contour)
    if area < 1e-12:
        raise DegenerateContour("outer lip contour has zero area")
    x_mid = 0.5 * (pts[MOUTH_CORNER_R, 0] + pts[MOUTH_CORNER_L, 0])
    right_half = _clip_halfplane(contour, x_mid, keep_le=True)
    left_half = _clip_halfplane(contour, x_mid, keep_le=False)
    return MouthGeometry(
        open=abs(pts[INNER_LIP_BOTTOM, 1] - pts[INNER_LIP_TOP, 1]),
        width=float(np.linalg.norm(pts[MOUTH_CORNER_L] - pts[MOUTH_CORNER_R])),
        area=area,
        area_right=_shoelace_area(right_half) if len(right_half) >= 3 else 0.0,
        area_left=_shoelace_area(left_half) if len(left_half) >= 3 else 0.0,
    )


def _eye_aspect_ratio(pts: np.ndarray, eye: tuple[int, ...]) -> float:
    p = pts[list(eye)]
    v1 = np.linalg.norm(p[1] - p[5])
    v2 = np.linalg.norm(p[2] - p[4])
    h = np.linalg.norm(p[0] - p[3])
    return float((v1 + v2) / (2.0 * h)) if h > 0 else 0.0


def _eye_opening(pts: np.ndarray) -> float:
    pairs = [(37, 41), (38, 40), (43, 47), (44, 46)]
    return float(np.mean([np.linalg.norm(pts[a] - pts[b]) for a, b in pairs]))


def _eyebrow_vpos(pts: np.ndarray) -> float:
    """Mean vertical brow-to-eye-center distance (positive: brow above eye)."""
    out = []
    for brow, eye in ((RIGHT_BROW, RIGHT_EYE), (LEFT_BROW, LEFT_EYE)):
        brow_y = pts[list(brow), 1].mean()
        eye_y = pts[list(eye), 1].mean()
        out.append(eye_y - brow_y)
    return float(np.mean(out))


def _valid_runs(valid: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of consecutive valid frames as (start, end) exclusive."""
    runs = []
    i, n = 0, len(valid)
    while i < n:
        if valid[i]:
            j = i
            while j < n and valid[j]:
                j += 1
            runs.append((i, j))
            i = j
        else:
            i += 1
    return runs


def _check_gaps(track: LandmarkTrack) -> list[tuple[int, int]]:
    runs = _valid_runs(track.valid)
    # interior detection gaps only; leading/trailing invalid stretches are
    # normal detector lead-in and are trimmed
    for (a, b), (c, d) in zip(runs, runs[1:]):
        gap = (c - b) / track.fps
        if gap > MAX_GAP_SECONDS:
            raise TrackGapTooLong(f"detection gap of {gap:.2f} s exceeds "
                                  f"{MAX_GAP_SECONDS} s")
    return runs


def blink_rate(track: LandmarkTrack,
               ear_threshold: float = EAR_BLINK_THRESHOLD,
               debounce: int = BLINK_DEBOUNCE_FRAMES) -> float:
    """Blinks per second of valid track time.

    A blink is the eye aspect ratio staying below the threshold for at
    least `debounce` consecutive valid frames.
    """
    runs = _check_gaps(track)
    n_valid = int(track.valid.sum())
    duration = n_valid / track.fps
    if duration < 1.0:
        raise TrackTooShort(f"need >= 1 s of valid frames, got {duration:.2f} s")
    blinks = 0
    for a, b in runs:
        below = 0
        for i in range(a, b):
            pts = track.frames[i]
            ear = 0.5 * (_eye_aspect_ratio(pts, RIGHT_EYE)
                         + _eye_aspect_ratio(pts, LEFT_EYE))
            if ear < ear_threshold:
                below += 1
            else:
                if below >= debounce:
                    blinks += 1
                below = 0
        if below >= debounce:
            blinks += 1
    return blinks / duration


def facial_metrics(track: LandmarkTrack,
                   ear_threshold: float = EAR_BLINK_THRESHOLD,
                   blink_debounce: int = BLINK_DEBOUNCE_FRAMES) -> dict[str, float]:
    """All per-utterance facial metrics, normalized and reduced.

    Per-frame quantities are computed on valid frames, derivative chains per
    contiguous valid run, then reduced (max/avg, plus min for the velocity,
    acceleration, and jerk families) and divided by the inter-lachrymal
    distance (areas by its square).  Blink rate stays in 1/s.
    """
    runs = _check_gaps(track)
    ild = interlachrymal_distance(track)
    if ild <= 0:
        raise DegenerateContour("inter-lachrymal distance is zero")

    opens, widths, areas, areas_r, areas_l, ratios = [], [], [], [], [], []
    eye_opens, brow_pos = [], []
    for a, b in runs:
        for i in range(a, b):
            pts = track.frames[i]
            geo = mouth_geometry(pts)
            opens.append(geo.open)
            widths.append(geo.width)
            areas.append(geo.area)
            areas_r.append(geo.area_right)
            areas_l.append(geo.area_left)
            lo, hi = sorted((geo.area_right, geo.area_left))
            ratios.append(lo / hi if hi > 0 else 0.0)
            eye_opens.append(_eye_opening(pts))
            brow_pos.append(_eyebrow_vpos(pts))

    paths = {"LL": 0.0, "JC": 0.0}
    kin: dict[str, list[np.ndarray]] = {
        f"{d}{p}{s}": [] for d in _DERIVATIVE_PREFIXES
        for p in ("LL", "JC") for s in ("", "_abs")
    }
    for point_name, idx in _KINEMATIC_POINTS.items():
        for a, b in runs:
            pos = track.frames[a:b, idx, :]
            if len(pos) >= 2:
                paths[point_name] += float(
                    np.sum(np.linalg.norm(np.diff(pos, axis=0), axis=1)))
            if len(pos) < 4:
                continue
            series = derivatives(pos)
            for prefix, arr in (("v", series.velocity),
                                ("a", series.acceleration),
                                ("j", series.jerk)):
                kin[f"{prefix}{point_name}"].append(arr[:, 1])
                kin[f"{prefix}{point_name}_abs"].append(
                    np.linalg.norm(arr, axis=1))

    out: dict[str, float] = {}
    for name, values in (("open", opens), ("width", widths),
                         ("eye_open", eye_opens), ("eyebrow_vpos", brow_pos)):
        arr = np.asarray(values)
        out[f"{name}_max"] = float(arr.max()) / ild
        out[f"{name}_avg"] = float(arr.mean()) / ild
    out["LL_path"] = paths["LL"] / ild
    out["JC_path"] = paths["JC"] / ild

    for key, chunks in kin.items():
        if not chunks:
            raise TrackTooShort("no valid run long enough for derivative chain")
        arr = np.concatenate(chunks)
        out[f"{key}_max"] = float(arr.max()) / ild
        out[f"{key}_avg"] = float(arr.mean()) / ild
        out[f"{key}_min"] = float(arr.min()) / ild

    ild2 = ild * ild
    for name, values in (("S", areas), ("S_R", areas_r), ("S_L", areas_l)):
        arr = np.asarray(values)
        out[f"{name}_max"] = float(arr.max()) / ild2
        out[f"{name}_avg"] = float(arr.mean()) / ild2
    out["S_ratio_avg"] = float(np.mean(ratios))
    out["eye_blinks"] = blink_rate(track, ear_threshold, blink_debounce)

    return {name: out[name] for name in FACIAL_METRIC_NAMES}

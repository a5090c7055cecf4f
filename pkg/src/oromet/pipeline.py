"""File-based orchestration: extract -> aggregate -> analyze.

The extract stage reads session manifests and emits one metrics CSV row per
(subject, task, utterance, metric); the analyze stage reads only that CSV
(plus the subjects CSV) and writes the statistical and predictive reports.
Runs are byte-reproducible: no timestamps, floats at 9 significant digits,
deterministic ordering, and a config hash embedded in every output.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .audio_io import load_wav
from .ddk import ddk_metrics, detect_syllable_onsets
from .errors import ClassTooSmall, NonConvergence, OrometError, TooFewSamples
from .facial import facial_metrics, load_landmarks
from .metrics_schema import metric_category, metric_unit
from .models import crossvalidate, severity_regression
from .sessions import DEFAULT_SIT_WORDS, Cohort, SessionManifest, load_manifest
from .stats import aggregate_by_task_type, pairwise_contrasts, rank_by_bul_con, zscore_by_sex
from .synth import synth_scenario
from .timing import Exclusion, apply_outlier_filter, detect_speech, timing_metrics
from .voice import (
    cpp,
    estimate_f0,
    hnr,
    jitter_local,
    period_sequence,
    shimmer_local,
    speech_intensity,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

METRICS_COLUMNS = ["subject_id", "sex", "cohort", "age", "task",
                   "utterance_id", "metric", "value", "unit", "status"]
CLASSIFICATION_PAIRS = (("BUL", "CON"), ("BUL", "PRE"), ("PRE", "CON"))
REGRESSION_COHORTS = ("PRE", "BUL")


@dataclass(frozen=True)
class RunConfig:
    """All tunable parameters of a pipeline run."""

    f_min: float = 60.0
    f_max: float = 400.0
    voicing_threshold: float = 0.45
    vad_margin_db: float = 10.0
    min_pause: float = 0.2
    min_speech: float = 0.1
    ear_threshold: float = 0.2
    blink_debounce: int = 2
    alpha: float = 0.05
    seed: int = 0
    bootstrap_ci: bool = False
    impute: bool = False
    sit_words: dict[int, int] = field(default_factory=lambda: dict(DEFAULT_SIT_WORDS))

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise ValueError("need 0 < f_min < f_max")
        if not 0.0 < self.voicing_threshold < 1.0:
            raise ValueError("voicing_threshold must be in (0, 1)")
        if not 0.0 < self.ear_threshold < 1.0:
            raise ValueError("ear_threshold must be in (0, 1)")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sit_words"] = {str(k): v for k, v in sorted(self.sit_words.items())}
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        data = tomllib.loads(Path(path).read_text())
        if "sit_words" in data:
            data["sit_words"] = {int(k): int(v) for k, v in data["sit_words"].items()}
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def round_floats(obj):
    """Recursively coerce numpy scalars and round floats to 9 significant digits."""
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(format(float(obj), ".9g"))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [round_floats(v) for v in obj.tolist()]
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(round_floats(payload), indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# extract
# --------------------------------------------------------------------------

def _extract_utterance(manifest: SessionManifest, utt, config: RunConfig,
                       ) -> tuple[list[dict], list[dict]]:
    rows: list[dict] = []
    errors: list[dict] = []
    subject = manifest.subject

    def err(stage: str, exc: Exception) -> None:
        errors.append({
            "subject_id": subject.subject_id,
            "utterance_id": utt.utterance_id,
            "task": utt.task.label,
            "stage": stage,
            "error": type(exc).__name__,
            "message": str(exc),
        })

    def add(metric: str, value, status: str = "ok") -> None:
        rows.append({
            "subject_id": subject.subject_id,
            "sex": subject.sex.value,
            "cohort": subject.cohort.value,
            "age": subject.age,
            "task": utt.task.label,
            "utterance_id": utt.utterance_id,
            "metric": metric,
            "value": float(value),
            "unit": metric_unit(metric),
            "status": status,
        })

    if utt.task.kind != "picture":
        try:
            clip = load_wav(utt.audio_path)
        except OrometError as exc:
            err("load_audio", exc)
            clip = None
        seg = None
        if clip is not None:
            try:
                seg = detect_speech(clip, margin_db=config.vad_margin_db,
                                    min_pause=config.min_pause,
                                    min_speech=config.min_speech)
            except OrometError as exc:
                err("vad", exc)
            if seg is not None:
                try:
                    add("speech_intensity", speech_intensity(clip, seg.segments))
                except OrometError as exc:
                    err("intensity", exc)

        if clip is not None and utt.task.kind == "held_vowel":
            try:
                contour = estimate_f0(clip, config.f_min, config.f_max,
                                      config.voicing_threshold)
                add("mean_f0", contour.mean_f0)
                cycles = period_sequence(clip, contour)
                add("jitter", jitter_local([p for p, _ in cycles]))
                add("shimmer", shimmer_local([a for _, a in cycles]))
                add("hnr", hnr(clip, contour))
            except OrometError as exc:
                err("phonation", exc)
            try:
                add("cpp", cpp(clip, config.f_min, config.f_max))
            except OrometError as exc:
                err("cpp", exc)

        elif seg is not None and utt.task.kind in ("sit", "bamboo"):
            expected = utt.task.expected_words(config.sit_words)
            try:
                tm = timing_metrics(seg, expected)
            except OrometError as exc:
                err("timing", exc)
                tm = None
            if tm is not None:
                verdict = apply_outlier_filter(tm, utt.task)
                status = ("ok" if not isinstance(verdict, Exclusion)
                          else f"excluded:{verdict.reason}")
                add("speaking_duration", tm.speaking_duration, status)
                add("articulation_duration", tm.articulation_duration, status)
                add("speaking_rate", tm.speaking_rate, status)
                add("articulation_rate", tm.articulation_rate, status)
                add("ppt", tm.ppt, status)

        elif seg is not None and clip is not None and utt.task.kind == "ddk":
            try:
                onsets = detect_syllable_onsets(clip, seg)
                dm = ddk_metrics(onsets, seg)
                add("speaking_duration", dm.speaking_duration)
                add("articulation_duration", dm.articulation_duration)
                add("syllable_count", dm.syllable_count)
                add("syllable_rate", dm.syllable_rate)
                if dm.ctv is not None:
                    add("ctv", dm.ctv)
            except OrometError as exc:
                err("ddk", exc)

    if utt.landmark_path:
        try:
            track = load_landmarks(utt.landmark_path)
            for name, value in facial_metrics(
                    track, ear_threshold=config.ear_threshold,
                    blink_debounce=config.blink_debounce).items():
                add(name, value)
        except OrometError as exc:
            err("facial", exc)

    return rows, errors


def cmd_extract(manifest_paths, out_dir, config: RunConfig) -> dict:
    """Extract every metric from the given sessions into metrics.csv.

    Per-utterance failures are logged to errors.json and the metrics simply
    absent; the run only fails when no utterance succeeds.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not manifest_paths:
        raise OrometError("no manifests given")

    manifests: list[SessionManifest] = []
    seen: set[str] = set()
    errors: list[dict] = []
    for p in manifest_paths:
        m = load_manifest(p)
        sid = m.subject.subject_id
        if sid in seen:
            # cross-sectional design: first session per subject wins
            errors.append({"subject_id": sid, "utterance_id": None,
                           "task": None, "stage": "load_manifest",
                           "error": "DuplicateSubject",
                           "message": f"second session {p} ignored"})
            continue
        seen.add(sid)
        manifests.append(m)

    rows: list[dict] = []
    n_ok = 0
    n_failed = 0
    for m in manifests:
        for utt in m.utterances:
            urows, uerrs = _extract_utterance(m, utt, config)
            rows.extend(urows)
            errors.extend(uerrs)
            if urows:
                n_ok += 1
            elif uerrs:
                n_failed += 1

    if n_ok == 0:
        raise OrometError("no utterance produced any metrics")

    rows.sort(key=lambda r: (r["subject_id"], r["utterance_id"], r["metric"]))
    metrics_path = out / "metrics.csv"
    with metrics_path.open("w") as fh:
        fh.write(f"# oromet extract v{__version__}\n")
        fh.write(f"# config_hash: {config.config_hash}\n")
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r[c]) for c in METRICS_COLUMNS) + "\n")

    subjects_path = out / "subjects.csv"
    with subjects_path.open("w") as fh:
        fh.write("subject_id,sex,age,cohort,is_control,alsfrs_total,bulbar_subscore\n")
        for m in sorted(manifests, key=lambda m: m.subject.subject_id):
            s = m.subject
            total = s.alsfrs.total if s.alsfrs else ""
            bulbar = s.alsfrs.bulbar_subscore if s.alsfrs else ""
            fh.write(f"{s.subject_id},{s.sex.value},{_fmt(s.age)},{s.cohort.value},"
                     f"{int(s.is_control)},{total},{bulbar}\n")

    errors_path = out / "errors.json"
    errors.sort(key=lambda e: (e["subject_id"], str(e["utterance_id"]), e["stage"]))
    _write_json(errors_path, errors)

    return {
        "metrics_csv": str(metrics_path),
        "subjects_csv": str(subjects_path),
        "errors_json": str(errors_path),
        "n_subjects": len(manifests),
        "n_utterances_ok": n_ok,
        "n_utterances_failed": n_failed,
        "n_rows": len(rows),
        "config_hash": config.config_hash,
    }


# --------------------------------------------------------------------------
# analyze
# --------------------------------------------------------------------------

def _load_metrics_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path, comment="#")
    missing = set(METRICS_COLUMNS) - set(df.columns)
    if missing:
        raise OrometError(f"metrics CSV missing columns: {sorted(missing)}")
    return df


def _wide_features(table: pd.DataFrame, cohorts: list[str], impute: bool,
                   ) -> tuple[pd.DataFrame, pd.Series]:
    sub = table[table["cohort"].isin(cohorts)]
    wide = sub.pivot_table(index="subject_id", columns="metric",
                           values="value", aggfunc="first")
    wide = wide.reindex(sorted(wide.columns), axis=1)
    wide = wide.drop(columns=[c for c in wide.columns if wide[c].isna().all()])
    if impute:
        wide = wide.fillna(wide.mean())
    else:
        wide = wide.dropna(axis=0)
    cohort_of = sub.groupby("subject_id")["cohort"].first()
    return wide, cohort_of.loc[wide.index]


def cmd_analyze(metrics_csv, subjects_csv, out_dir, config: RunConfig) -> dict:
    """Run contrasts, classification, and severity regression over metrics.

    Stages degrade independently; each one's status lands in
    analysis_report.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = _load_metrics_csv(metrics_csv)
    subjects = pd.read_csv(subjects_csv)

    agg = aggregate_by_task_type(rows)
    ztable, flags = zscore_by_sex(agg)
    report: dict = {
        "version": __version__,
        "config_hash": config.config_hash,
        "n_subjects": int(agg["subject_id"].nunique()) if len(agg) else 0,
        "degenerate_zscore_groups": [dataclasses.asdict(f) for f in flags],
        "stages": {},
    }
    present = sorted(ztable["cohort"].unique()) if len(ztable) else []

    # --- group contrasts -------------------------------------------------
    if len(present) >= 2:
        effects = pairwise_contrasts(ztable, alpha=config.alpha,
                                     bootstrap=config.bootstrap_ci,
                                     seed=config.seed)
        effects_path = out / "effects.csv"
        with effects_path.open("w") as fh:
            fh.write("metric,pair,delta,ci_lo,ci_hi,p,p_omnibus,n_treat,n_control\n")
            for _, r in effects.iterrows():
                fh.write(f"{r['metric']},{r['pair']},{_fmt(r['delta'])},"
                         f"{_fmt(r['ci_lo'])},{_fmt(r['ci_hi'])},{_fmt(r['p'])},"
                         f"{_fmt(r['p_omnibus'])},{int(r['n_treat'])},"
                         f"{int(r['n_control'])}\n")
        ranked = rank_by_bul_con(effects, alpha=config.alpha)
        for entry in ranked:
            entry["category"] = metric_category(entry["metric"])
        _write_json(out / "effects_ranked.json", ranked)
        report["stages"]["contrasts"] = {
            "status": "ok", "n_significant": int(len(ranked)),
            "files": ["effects.csv", "effects_ranked.json"],
        }
    else:
        report["stages"]["contrasts"] = {
            "status": "skipped: insufficient cohorts",
            "cohorts_present": present,
        }

    # --- classification ---------------------------------------------------
    cv_report: dict = {}
    roc_rows: list[str] = []
    for treat, control in CLASSIFICATION_PAIRS:
        key = f"{treat}_vs_{control}"
        if treat not in present or control not in present:
            cv_report[key] = {"status": "skipped: cohort absent"}
            continue
        wide, cohort_of = _wide_features(ztable, [treat, control], config.impute)
        y = (cohort_of == treat).astype(int).to_numpy()
        if int(y.sum()) < 5 or int((1 - y).sum()) < 5:
            cv_report[key] = {"status": "skipped: cohort too small",
                              "n_treat": int(y.sum()),
                              "n_control": int((1 - y).sum())}
            continue
        try:
            cv = crossvalidate(wide.to_numpy(dtype=np.float64), y,
                               list(wide.columns), k=5, seed=config.seed)
        except (ClassTooSmall, NonConvergence) as exc:
            cv_report[key] = {"status": f"failed: {type(exc).__name__}",
                              "message": str(exc)}
            continue
        cv_report[key] = {
            "status": "ok",
            "positive_class": treat,
            "n_treat": int(y.sum()),
            "n_control": int((1 - y).sum()),
            "uar_mean": cv.uar_mean,
            "uar_sd": cv.uar_sd,
            "auc": cv.roc_curve.auc,
            "folds": [
                {
                    "fold": f.fold, "uar": f.uar,
                    "sensitivity": f.sensitivity, "specificity": f.specificity,
                    "rfe_k": f.rfe_k, "selected": list(f.selected),
                }
                for f in cv.folds
            ],
            "skipped_folds": list(cv.skipped_folds),
        }
        for thr, fp, tp in zip(cv.roc_curve.thresholds, cv.roc_curve.fpr,
                               cv.roc_curve.tpr):
            thr_txt = "inf" if np.isinf(thr) else _fmt(float(thr))
            roc_rows.append(f"{key},{thr_txt},{_fmt(float(fp))},{_fmt(float(tp))}")
    _write_json(out / "cv_report.json", cv_report)
    (out / "roc_points.csv").write_text(
        "pair,threshold,fpr,tpr\n" + "".join(r + "\n" for r in roc_rows))
    report["stages"]["classification"] = {
        "status": "ok",
        "pairs": {k: v.get("status") for k, v in cv_report.items()},
        "files": ["cv_report.json", "roc_points.csv"],
    }

    # --- severity regression ---------------------------------------------
    lars_report: dict = {}
    for cohort in REGRESSION_COHORTS:
        if cohort not in present:
            lars_report[cohort] = {"status": "skipped: cohort absent"}
            continue
        try:
            res = severity_regression(ztable, subjects, cohort)
        except TooFewSamples as exc:
            lars_report[cohort] = {"status": "skipped: too few samples",
                                   "message": str(exc)}
            continue
        lars_report[cohort] = {
            "status": "ok",
            "n_used": res.n_used,
            "dropped_subjects": list(res.dropped_subjects),
            "dropped_metrics": list(res.dropped_metrics),
            "entries": list(res.listing),
            "cumulative_r2": res.path.cumulative_r2,
            "notes": list(res.path.notes),
        }
    _write_json(out / "lars_path.json", lars_report)
    report["stages"]["regression"] = {
        "status": "ok",
        "cohorts": {k: v.get("status") for k, v in lars_report.items()},
        "files": ["lars_path.json"],
    }

    _write_json(out / "analysis_report.json", report)
    report["out_dir"] = str(out)
    return report


# --------------------------------------------------------------------------
# synth + validate
# --------------------------------------------------------------------------

def cmd_synth(scenario: str, out_dir, seed: int = 0,
              params: dict | None = None) -> dict:
    return synth_scenario(scenario, out_dir, seed=seed, params=params)


def cmd_validate_manifest(path) -> dict:
    """Validation report for one manifest; never raises on invalid input."""
    try:
        manifest = load_manifest(path)
    except OrometError as exc:
        return {"valid": False, "path": str(path),
                "error": type(exc).__name__, "message": str(exc)}
    return {
        "valid": True,
        "path": str(path),
        "subject_id": manifest.subject.subject_id,
        "cohort": manifest.subject.cohort.value,
        "n_utterances": len(manifest.utterances),
        "tasks": [u.task.label for u in manifest.utterances],
    }

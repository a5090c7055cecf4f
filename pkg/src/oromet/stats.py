"""Cohort-level statistics: aggregation, sex z-scoring, group contrasts.

Metric tables are pandas DataFrames with the row contract
(subject_id, cohort, sex, metric, value); sample (n-1) standard deviations
are used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats as sstats

from .errors import AllValuesTied, ZeroControlVariance
from .sessions import Cohort

TABLE_COLUMNS = ["subject_id", "cohort", "sex", "metric", "value"]

# durations stay per task type instead of averaging across types
PER_TASK_METRICS = ("speaking_duration", "articulation_duration")

CONTRAST_PAIRS = (
    (Cohort.BUL, Cohort.CON),
    (Cohort.PRE, Cohort.CON),
    (Cohort.BUL, Cohort.PRE),
)


def aggregate_by_task_type(rows: pd.DataFrame) -> pd.DataFrame:
    """Collapse per-utterance rows to one value per (subject, metric).

    Values are averaged within task type first, then across task types, so
    the six sentence readings weigh as one task type next to the passage.
    Durations keep a per-task-type suffix instead.  Rows whose status is not
    "ok" are dropped, never zero-filled.
    """
    df = rows.copy()
    if "status" in df.columns:
        df = df[df["status"] == "ok"]
    df = df.dropna(subset=["value"])
    if df.empty:
        return pd.DataFrame(columns=TABLE_COLUMNS)

    df["task_type"] = df["task"].map(_task_type)
    per_task = df["metric"].isin(PER_TASK_METRICS)
    df.loc[per_task, "metric"] = (
        df.loc[per_task, "metric"] + "_" + df.loc[per_task, "task_type"])

    within = (df.groupby(["subject_id", "cohort", "sex", "metric", "task_type"],
                         as_index=False, sort=True)["value"].mean())
    across = (within.groupby(["subject_id", "cohort", "sex", "metric"],
                             as_index=False, sort=True)["value"].mean())
    return across[TABLE_COLUMNS].reset_index(drop=True)


def _task_type(task_label: str) -> str:
    return "sit" if task_label.startswith("sit") else task_label


@dataclass(frozen=True)
class DegenerateGroupFlag:
    sex: str
    metric: str
    reason: str  # "n<2" | "sd=0"


def zscore_by_sex(table: pd.DataFrame,
                  ) -> tuple[pd.DataFrame, list[DegenerateGroupFlag]]:
    """Standardize each metric within each sex group.

    Groups with fewer than two subjects or zero variance are flagged and
    dropped rather than emitted.
    """
    out = []
    flags: list[DegenerateGroupFlag] = []
    for (sex, metric), grp in table.groupby(["sex", "metric"], sort=True):
        values = grp["value"].to_numpy(dtype=np.float64)
        if len(values) < 2:
            flags.append(DegenerateGroupFlag(sex, metric, "n<2"))
            continue
        sd = float(np.std(values, ddof=1))
        if sd == 0.0:
            flags.append(DegenerateGroupFlag(sex, metric, "sd=0"))
            continue
        g = grp.copy()
        g["value"] = (values - float(np.mean(values))) / sd
        out.append(g)
    if not out:
        return pd.DataFrame(columns=TABLE_COLUMNS), flags
    result = pd.concat(out, ignore_index=True)
    result = result.sort_values(["metric", "subject_id"]).reset_index(drop=True)
    return result[TABLE_COLUMNS], flags


def kruskal_wallis(groups) -> tuple[float, float]:
    """Rank-based H statistic with tie correction; p from chi-square."""
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(arrays) < 2 or any(a.size == 0 for a in arrays):
        raise ValueError("need >= 2 non-empty groups")
    pooled = np.concatenate(arrays)
    n = pooled.size
    if n < 3:
        raise ValueError(f"need >= 3 total observations, got {n}")
    if np.all(pooled == pooled[0]):
        raise AllValuesTied("all observations are identical")

    ranks = sstats.rankdata(pooled)
    h = 0.0
    offset = 0
    for a in arrays:
        r = ranks[offset : offset + a.size]
        h += r.sum() ** 2 / a.size
        offset += a.size
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)

    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts.astype(np.float64) ** 3 - counts))
    correction = 1.0 - tie_term / (n**3 - n)
    h /= correction
    p = float(sstats.chi2.sf(h, df=len(arrays) - 1))
    return float(h), p


@dataclass(frozen=True)
class GlassDelta:
    delta: float
    ci_lo: float
    ci_hi: float
    n_treatment: int
    n_control: int


def glass_delta(treatment, control, bootstrap: bool = False,
                n_boot: int = 2000, seed: int = 0) -> GlassDelta:
    """Mean difference in units of the control group's sample SD, with 95% CI.

    The default CI uses the large-sample standard error; a percentile
    bootstrap is available for sensitivity checks.
    """
    t = np.asarray(treatment, dtype=np.float64)
    c = np.asarray(control, dtype=np.float64)
    if c.size < 2:
        raise ZeroControlVariance(f"control group needs >= 2 values, got {c.size}")
    sd_c = float(np.std(c, ddof=1))
    if sd_c == 0.0:
        raise ZeroControlVariance("control group has zero variance")
    delta = float((np.mean(t) - np.mean(c)) / sd_c)
    if bootstrap:
        rng = np.random.default_rng(seed)
        reps = np.empty(n_boot)
        for i in range(n_boot):
            tb = rng.choice(t, size=t.size, replace=True)
            cb = rng.choice(c, size=c.size, replace=True)
            sd_b = np.std(cb, ddof=1)
            reps[i] = (tb.mean() - cb.mean()) / sd_b if sd_b > 0 else np.nan
        reps = reps[np.isfinite(reps)]
        lo, hi = np.percentile(reps, [2.5, 97.5])
    else:
        se = np.sqrt((t.size + c.size) / (t.size * c.size)
                     + delta**2 / (2.0 * (c.size - 1)))
        lo, hi = delta - 1.96 * se, delta + 1.96 * se
    return GlassDelta(delta=delta, ci_lo=float(lo), ci_hi=float(hi),
                      n_treatment=int(t.size), n_control=int(c.size))


def pairwise_contrasts(table: pd.DataFrame, alpha: float = 0.05,
                       bootstrap: bool = False, seed: int = 0) -> pd.DataFrame:
    """Omnibus test per metric, then gated pairwise contrasts with effect sizes.

    For every metric whose omnibus rank test over the present cohorts has
    p < alpha, each cohort pair present in the data gets a pairwise rank
    test plus the effect size (second cohort of the pair is the control).
    Columns: metric, pair, delta, ci_lo, ci_hi, p, p_omnibus, n_treat, n_control.
    """
    records = []
    for metric, grp in table.groupby("metric", sort=True):
        by_cohort = {
            cohort: sub["value"].to_numpy(dtype=np.float64)
            for cohort, sub in grp.groupby("cohort", sort=True)
            if len(sub) > 0
        }
        if len(by_cohort) < 2:
            continue
        try:
            _, p_omni = kruskal_wallis(list(by_cohort.values()))
        except AllValuesTied:
            continue
        if p_omni >= alpha:
            continue
        for treat, control in CONTRAST_PAIRS:
            t_key, c_key = treat.value, control.value
            if t_key not in by_cohort or c_key not in by_cohort:
                continue
            try:
                _, p_pair = kruskal_wallis([by_cohort[t_key], by_cohort[c_key]])
            except AllValuesTied:
                continue
            try:
                es = glass_delta(by_cohort[t_key], by_cohort[c_key],
                                 bootstrap=bootstrap, seed=seed)
            except ZeroControlVariance:
                continue
            records.append({
                "metric": metric,
                "pair": f"{t_key}-{c_key}",
                "delta": es.delta,
                "ci_lo": es.ci_lo,
                "ci_hi": es.ci_hi,
                "p": p_pair,
                "p_omnibus": p_omni,
                "n_treat": es.n_treatment,
                "n_control": es.n_control,
            })
    columns = ["metric", "pair", "delta", "ci_lo", "ci_hi", "p", "p_omnibus",
               "n_treat", "n_control"]
    return pd.DataFrame.from_records(records, columns=columns)


def rank_by_bul_con(effects: pd.DataFrame, alpha: float = 0.05) -> list[dict]:
    """Plot-ready listing of significant contrasts, ranked by the BUL-CON pair.

    Metrics with a significant BUL-CON entry come first in descending
    absolute effect size; remaining metrics follow alphabetically.
    """
    sig = effects[effects["p"] < alpha]
    order: dict[str, float] = {}
    for _, row in sig[sig["pair"] == "BUL-CON"].iterrows():
        order[row["metric"]] = abs(row["delta"])
    metrics = sorted(sig["metric"].unique(),
                     key=lambda m: (-order.get(m, -np.inf), m))
    ranked = []
    for metric in metrics:
        entry = {"metric": metric, "pairs": {}}
        for _, row in sig[sig["metric"] == metric].iterrows():
            entry["pairs"][row["pair"]] = {
                "delta": row["delta"],
                "ci": [row["ci_lo"], row["ci_hi"]],
                "p": row["p"],
            }
        ranked.append(entry)
    return ranked

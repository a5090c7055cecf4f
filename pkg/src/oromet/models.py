"""Learning layer: regularized logistic classification with recursive
feature elimination under stratified cross-validation, ROC construction,
and the least-angle regression path with the lasso modification.

Everything here is deterministic given the seed: fold assignment uses a
label-symmetric permutation scheme, and all ties break on feature-name
order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ClassTooSmall, NonConvergence, SingleClass, TooFewSamples
from .metrics_schema import metric_category

RIDGE_DEFAULT = 1e-4
RFE_K_GRID = (3, 5, 8, 12)


# --------------------------------------------------------------------------
# logistic regression (Newton iteration with unpenalized intercept)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    intercept: float
    n_iter: int


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -35.0, 35.0)))


def _penalized_loglik(z, y, w, ridge) -> float:
    return float(np.sum(y * z - np.logaddexp(0.0, z)) - 0.5 * ridge * np.dot(w, w))


def fit_logistic(X, y, ridge: float = RIDGE_DEFAULT, tol: float = 1e-8,
                 max_iter: int = 200) -> LogisticModel:
    """Maximize the ridge-penalized log-likelihood by damped Newton steps.

    The intercept is not penalized.  Raises NonConvergence when the gradient
    norm does not reach tol within max_iter iterations.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    xd = np.column_stack([np.ones(n), X])
    pen = np.concatenate([[0.0], np.full(p, ridge)])
    theta = np.zeros(p + 1)

    for it in range(1, max_iter + 1):
        z = xd @ theta
        prob = _sigmoid(z)
        grad = xd.T @ (y - prob) - pen * theta
        if np.max(np.abs(grad)) < tol:
            return LogisticModel(weights=theta[1:].copy(),
                                 intercept=float(theta[0]), n_iter=it)
        w = np.clip(prob * (1.0 - prob), 1e-10, None)
        hess = xd.T @ (xd * w[:, None]) + np.diag(pen)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]

        obj = _penalized_loglik(z, y, theta[1:], ridge)
        alpha = 1.0
        for _ in range(40):
            cand = theta + alpha * step
            if _penalized_loglik(xd @ cand, y, cand[1:], ridge) > obj:
                theta = cand
                break
            alpha *= 0.5
        else:
            theta = theta + step  # full step; next gradient check decides
    raise NonConvergence(f"logistic fit did not converge in {max_iter} iterations")


def predict_proba(model: LogisticModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return _sigmoid(X @ model.weights + model.intercept)


# --------------------------------------------------------------------------
# recursive feature elimination
# --------------------------------------------------------------------------

def _rfe_drop_order(X, y, names, ridge, floor: int) -> list[int]:
    """Column indices in elimination order, down to `floor` survivors.

    Smallest |coefficient| goes first (coefficients live on standardized
    columns); ties drop the lexicographically last feature name.
    """
    active = list(range(X.shape[1]))
    dropped: list[int] = []
    while len(active) > floor:
        model = fit_logistic(X[:, active], y, ridge=ridge)
        mags = np.abs(model.weights)
        m = mags.min()
        tied = [active[i] for i in range(len(active))
                if mags[i] <= m + 1e-9 * max(m, 1.0)]
        victim = max(tied, key=lambda j: names[j])
        active.remove(victim)
        dropped.append(victim)
    return dropped


def rfe(X, y, feature_names, target_k: int,
        ridge: float = RIDGE_DEFAULT) -> list[str]:
    """Names of the target_k surviving features, in original column order."""
    X = np.asarray(X, dtype=np.float64)
    if target_k < 1:
        raise ValueError(f"target_k must be >= 1, got {target_k}")
    names = list(feature_names)
    target_k = min(target_k, X.shape[1])
    dropped = set(_rfe_drop_order(X, y, names, ridge, target_k))
    return [names[j] for j in range(X.shape[1]) if j not in dropped]


# --------------------------------------------------------------------------
# ROC
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def roc(scores, labels) -> RocCurve:
    """Threshold sweep over distinct scores with trapezoidal AUC."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC requires both classes in the labels")
    order = np.argsort(-scores, kind="stable")
    s, l = scores[order], labels[order]
    thresholds = [np.inf]
    fpr = [0.0]
    tpr = [0.0]
    tp = fp = 0
    i = 0
    while i < len(s):
        j = i
        while j < len(s) and s[j] == s[i]:
            tp += int(l[j] == 1)
            fp += int(l[j] == 0)
            j += 1
        thresholds.append(s[i])
        fpr.append(fp / n_neg)
        tpr.append(tp / n_pos)
        i = j
    fpr_arr = np.asarray(fpr)
    tpr_arr = np.asarray(tpr)
    return RocCurve(thresholds=np.asarray(thresholds), fpr=fpr_arr, tpr=tpr_arr,
                    auc=float(np.trapezoid(tpr_arr, fpr_arr)))


# --------------------------------------------------------------------------
# stratified cross-validation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldResult:
    fold: int
    uar: float
    sensitivity: float
    specificity: float
    selected: tuple[str, ...]
    rfe_k: int
    weights: np.ndarray
    intercept: float
    test_indices: tuple[int, ...]


@dataclass(frozen=True)
class CvResult:
    folds: tuple[FoldResult, ...]
    uar_mean: float
    uar_sd: float
    roc_curve: RocCurve
    skipped_folds: tuple[int, ...] = field(default_factory=tuple)


def standardize_columns(X, mean=None, sd=None):
    """Column standardization; zero-variance columns pass through centered."""
    X = np.asarray(X, dtype=np.float64)
    if mean is None:
        mean = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1)
        sd = np.where(sd == 0.0, 1.0, sd)
    return (X - mean) / sd, mean, sd


def _stratified_folds(y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold label per sample; assignment depends only on the permutation and
    each sample's rank within its class, so relabeling classes 0<->1 leaves
    the partition unchanged."""
    n = len(y)
    folds = np.empty(n, dtype=np.int64)
    counters: dict[int, int] = {}
    for i in rng.permutation(n):
        c = int(y[i])
        folds[i] = counters.get(c, 0) % k
        counters[c] = counters.get(c, 0) + 1
    return folds


def _uar(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[float, float, float]:
    sens = float(np.mean(y_pred[y_true == 1] == 1))
    spec = float(np.mean(y_pred[y_true == 0] == 0))
    return (sens + spec) / 2.0, sens, spec


def crossvalidate(X, y, feature_names, k: int = 5, seed: int = 0,
                  ridge: float = RIDGE_DEFAULT, k_grid=RFE_K_GRID,
                  inner_folds: int = 3) -> CvResult:
    """Stratified k-fold logistic classification with per-fold RFE.

    Standardization and feature selection happen inside each training fold;
    the RFE subset size is chosen by inner validation over k_grid.  Scores
    from all test folds pool into one ROC curve.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    names = list(feature_names)
    for cls in (0, 1):
        if int(np.sum(y == cls)) < k:
            raise ClassTooSmall(f"class {cls} has fewer than {k} members")

    rng = np.random.default_rng(seed)
    folds = _stratified_folds(y, k, rng)

    results = []
    skipped = []
    pooled_scores = np.empty(len(y))
    for f in range(k):
        test = folds == f
        train = ~test
        x_tr, mu, sd = standardize_columns(X[train])
        x_te = (X[test] - mu) / sd
        y_tr, y_te = y[train], y[test]
        try:
            chosen_k = _choose_rfe_k(x_tr, y_tr, names, ridge, k_grid,
                                     inner_folds, seed, f)
            selected = rfe(x_tr, y_tr, names, chosen_k, ridge=ridge)
            cols = [names.index(s) for s in selected]
            model = fit_logistic(x_tr[:, cols], y_tr, ridge=ridge)
        except NonConvergence:
            skipped.append(f)
            pooled_scores[test] = 0.5
            continue
        scores = predict_proba(model, x_te[:, cols])
        pooled_scores[test] = scores
        uar, sens, spec = _uar(y_te, (scores >= 0.5).astype(np.int64))
        results.append(FoldResult(
            fold=f, uar=uar, sensitivity=sens, specificity=spec,
            selected=tuple(selected), rfe_k=chosen_k,
            weights=model.weights, intercept=model.intercept,
            test_indices=tuple(int(i) for i in np.nonzero(test)[0]),
        ))
    if not results:
        raise NonConvergence("every fold failed to converge")
    uars = np.array([r.uar for r in results])
    return CvResult(
        folds=tuple(results),
        uar_mean=float(uars.mean()),
        uar_sd=float(uars.std(ddof=1)) if len(uars) > 1 else 0.0,
        roc_curve=roc(pooled_scores, y),
        skipped_folds=tuple(skipped),
    )


def _choose_rfe_k(x_tr, y_tr, names, ridge, k_grid, inner_folds, seed, fold) -> int:
    """Inner-validation choice of the RFE subset size (ties -> smaller k)."""
    p = x_tr.shape[1]
    candidates = sorted({min(kk, p) for kk in k_grid})
    if len(candidates) == 1:
        return candidates[0]
    counts = np.bincount(y_tr, minlength=2)
    n_inner = min(inner_folds, int(counts.min()))
    if n_inner < 2:
        return candidates[0]
    rng = np.random.default_rng([seed, fold])
    folds = _stratified_folds(y_tr, n_inner, rng)
    score_by_k = {kk: [] for kk in candidates}
    for g in range(n_inner):
        val = folds == g
        fit_idx = ~val
        xs, mu, sd = standardize_columns(x_tr[fit_idx])
        xv = (x_tr[val] - mu) / sd
        try:
            drop_order = _rfe_drop_order(xs, y_tr[fit_idx], names, ridge,
                                         candidates[0])
        except NonConvergence:
            continue
        for kk in candidates:
            dropped = set(drop_order[: p - kk])
            cols = [j for j in range(p) if j not in dropped]
            try:
                model = fit_logistic(xs[:, cols], y_tr[fit_idx], ridge=ridge)
            except NonConvergence:
                continue
            pred = (predict_proba(model, xv[:, cols]) >= 0.5).astype(np.int64)
            uar, _, _ = _uar(y_tr[val], pred)
            score_by_k[kk].append(uar)
    best_k, best_score = candidates[0], -1.0
    for kk in candidates:
        if score_by_k[kk]:
            mean_score = float(np.mean(score_by_k[kk]))
            if mean_score > best_score + 1e-12:
                best_k, best_score = kk, mean_score
    return best_k


# --------------------------------------------------------------------------
# least-angle regression with the lasso modification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PathEvent:
    step: int
    action: str  # "enter" | "drop"
    feature: str
    sign: int


@dataclass(frozen=True)
class PathKnot:
    step: int
    coefficients: np.ndarray
    r2: float
    c_max: float  # max |correlation with residual| at the knot


@dataclass(frozen=True)
class LarsPath:
    feature_names: tuple[str, ...]
    events: tuple[PathEvent, ...]
    knots: tuple[PathKnot, ...]
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def entry_events(self) -> tuple[PathEvent, ...]:
        return tuple(e for e in self.events if e.action == "enter")

    @property
    def cumulative_r2(self) -> list[float]:
        return [k.r2 for k in self.knots]

    @property
    def final_coefficients(self) -> np.ndarray:
        if not self.knots:
            return np.zeros(len(self.feature_names))
        return self.knots[-1].coefficients


def lars_lasso_path(X, y, feature_names=None, max_steps: int | None = None,
                    ) -> LarsPath:
    """Trace the lasso solution path via least-angle regression.

    X must have (near) zero-mean columns on a comparable scale and y must be
    centered.  Coefficients advance along the direction equiangular to the
    active features' correlations with the residual; a coefficient crossing
    zero leaves the active set (the lasso modification).  The path stops at
    the full least-squares fit or at min(n-1, p) active features.  Collinear
    entrants are skipped and noted.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n, p = X.shape
    names = tuple(feature_names) if feature_names is not None else tuple(
        f"f{i}" for i in range(p))
    if n < 2:
        raise TooFewSamples(f"need n >= 2, got {n}")
    col_norm = np.linalg.norm(X, axis=0)
    if np.any(np.abs(X.mean(axis=0)) > 1e-6 * np.maximum(col_norm, 1e-12)):
        raise ValueError("columns of X must be centered")
    if abs(y.mean()) > 1e-6 * max(float(np.linalg.norm(y)), 1e-12):
        raise ValueError("y must be centered")

    tss = float(np.dot(y, y))
    if tss < 1e-12:
        return LarsPath(feature_names=names, events=(), knots=())

    tol = 1e-12
    max_active = min(n - 1, p)
    if max_steps is None:
        max_steps = 8 * p + 10
    active: list[int] = []
    signs: dict[int, float] = {}
    ineligible: set[int] = set()
    beta = np.zeros(p)
    mu = np.zeros(n)
    events: list[PathEvent] = []
    knots: list[PathKnot] = []
    notes: list[str] = []
    just_dropped = False

    for step in range(1, max_steps + 1):
        r = y - mu
        c = X.T @ r
        eligible = [j for j in range(p) if j not in ineligible]
        if not eligible:
            break
        c_eligible = np.abs(c[eligible])
        C = float(c_eligible.max())
        if C < 1e-10 * np.sqrt(tss):
            break

        inactive = [j for j in eligible if j not in active]
        if not just_dropped and len(active) < max_active and inactive:
            # admit the most-correlated inactive feature (ties by name),
            # skipping entrants that make the active Gram ill-conditioned
            ranked = sorted(inactive, key=lambda j: (-abs(c[j]), names[j]))
            entered = False
            for j in ranked:
                if abs(c[j]) < C - 1e-9 * C:
                    break
                trial = active + [j]
                g_try = X[:, trial].T @ X[:, trial]
                if np.linalg.cond(g_try) > 1e12:
                    ineligible.add(j)
                    notes.append(f"skipped collinear entrant {names[j]}")
                    continue
                active.append(j)
                signs[j] = 1.0 if c[j] >= 0 else -1.0
                events.append(PathEvent(step=len(knots) + 1, action="enter",
                                        feature=names[j], sign=int(signs[j])))
                entered = True
                break
            if not entered and not active:
                break
        just_dropped = False
        if not active:
            break

        s = np.array([signs[j] for j in active])
        xa = X[:, active] * s
        gram = xa.T @ xa
        try:
            alpha = np.linalg.solve(gram, np.ones(len(active)))
        except np.linalg.LinAlgError:
            victim = active.pop()
            ineligible.add(victim)
            notes.append(f"dropped rank-deficient entrant {names[victim]}")
            continue
        a_norm = 1.0 / np.sqrt(float(np.sum(alpha)))
        w = a_norm * alpha
        u = xa @ w
        corr_u = X.T @ u

        c_active = float(np.mean(np.abs(c[active])))
        gamma_max = c_active / a_norm
        gamma = gamma_max
        for j in inactive:
            if j in active or j in ineligible:
                continue
            for num, den in ((c_active - c[j], a_norm - corr_u[j]),
                             (c_active + c[j], a_norm + corr_u[j])):
                if abs(den) > tol:
                    val = num / den
                    if tol < val < gamma:
                        gamma = val

        direction = np.zeros(p)
        direction[active] = s * w
        gamma_drop = np.inf
        droppers: list[int] = []
        for j in active:
            if abs(direction[j]) > tol:
                val = -beta[j] / direction[j]
                if tol < val < gamma_drop - 1e-12:
                    gamma_drop = val
                    droppers = [j]
                elif abs(val - gamma_drop) <= 1e-12:
                    droppers.append(j)
        if gamma_drop < gamma - 1e-12:
            gamma = gamma_drop
        else:
            droppers = []

        beta[active] = beta[active] + gamma * direction[active]
        mu = mu + gamma * u
        for j in droppers:
            beta[j] = 0.0
            active.remove(j)
            del signs[j]
            events.append(PathEvent(step=len(knots) + 1, action="drop",
                                    feature=names[j], sign=0))
        just_dropped = bool(droppers)

        resid = y - mu
        rss = float(np.dot(resid, resid))
        c_after = max(0.0, c_active - gamma * a_norm)
        knots.append(PathKnot(step=len(knots) + 1, coefficients=beta.copy(),
                              r2=1.0 - rss / tss, c_max=c_after))

        done_all = len(active) >= max_active or not [
            j for j in eligible if j not in active]
        if not droppers and done_all and gamma >= gamma_max - 1e-12:
            break

    return LarsPath(feature_names=names, events=tuple(events),
                    knots=tuple(knots), notes=tuple(notes))


# --------------------------------------------------------------------------
# severity regression over a cohort's metric table
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SeverityResult:
    cohort: str
    path: LarsPath
    listing: tuple[dict, ...]  # entry order with cumulative R^2 and category
    n_used: int
    dropped_subjects: tuple[str, ...]
    dropped_metrics: tuple[str, ...]


def severity_regression(table: pd.DataFrame, subjects: pd.DataFrame,
                        cohort: str) -> SeverityResult:
    """Lasso path predicting the total functional score inside one cohort.

    Subjects missing any retained metric are deleted row-wise (metrics
    absent for the whole cohort are dropped first); the design matrix is
    standardized per cohort and the target centered.
    """
    cohort = str(getattr(cohort, "value", cohort))
    subj = subjects[(subjects["cohort"] == cohort)
                    & subjects["alsfrs_total"].notna()]
    ids = set(subj["subject_id"])
    rows = table[table["subject_id"].isin(ids)]
    wide = rows.pivot_table(index="subject_id", columns="metric",
                            values="value", aggfunc="first")
    wide = wide.reindex(sorted(wide.columns), axis=1)

    dropped_metrics = [c for c in wide.columns if wide[c].isna().all()]
    wide = wide.drop(columns=dropped_metrics)
    complete = wide.dropna(axis=0)
    dropped_subjects = sorted(set(wide.index) - set(complete.index)
                              | (ids - set(wide.index)))
    if len(complete) < 5:
        raise TooFewSamples(
            f"cohort {cohort}: {len(complete)} complete subjects, need >= 5")

    constant = [c for c in complete.columns
                if float(complete[c].std(ddof=1)) == 0.0]
    complete = complete.drop(columns=constant)
    dropped_metrics = sorted(dropped_metrics + constant)

    totals = subj.set_index("subject_id").loc[complete.index, "alsfrs_total"]
    y = totals.to_numpy(dtype=np.float64)
    y = y - y.mean()
    xs, _, _ = standardize_columns(complete.to_numpy(dtype=np.float64))
    names = list(complete.columns)
    path = lars_lasso_path(xs, y, feature_names=names)

    listing = []
    for order, event in enumerate(path.entry_events, start=1):
        knot = path.knots[event.step - 1]
        listing.append({
            "order": order,
            "feature": event.feature,
            "sign": event.sign,
            "cumulative_r2": knot.r2,
            "category": metric_category(event.feature),
        })
    return SeverityResult(
        cohort=cohort, path=path, listing=tuple(listing),
        n_used=int(len(complete)),
        dropped_subjects=tuple(dropped_subjects),
        dropped_metrics=tuple(dropped_metrics),
    )

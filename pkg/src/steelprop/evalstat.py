"""Scoring, shared-fold cross-validation and Friedman/Bonferroni comparison.

R-square and EQM follow the standard definitions

    SQtot = sum (T_i - mean(T))**2      SQres = sum (T_i - y_i)**2
    R2 = 1 - SQres / SQtot              EQM = SQres / n

and R2 is reported as-is, including negative values for fits worse than
predicting the mean. Model families are compared on a blocks x treatments
score matrix: within-block average ranks, the Friedman chi-square statistic
and Bonferroni-corrected pairwise rank differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy.special import gammaincc, ndtri

from .dataset import FoldAssignment, fit_scaler
from .errors import SteelpropError, ValidationError


def r_square(targets, predictions) -> float:
    """Coefficient of determination; errors out when SQtot is zero."""
    t = np.asarray(targets, dtype=np.float64)
    y = np.asarray(predictions, dtype=np.float64)
    if t.shape != y.shape or t.size == 0:
        raise ValidationError("targets and predictions must align, n >= 1")
    sq_tot = float(np.sum((t - t.mean()) ** 2))
    if sq_tot == 0.0:
        raise ValidationError("R-square undefined: all targets identical (SQtot = 0)")
    sq_res = float(np.sum((t - y) ** 2))
    return 1.0 - sq_res / sq_tot


def eqm(targets, predictions) -> float:
    """Mean squared error (erro quadratico medio)."""
    t = np.asarray(targets, dtype=np.float64)
    y = np.asarray(predictions, dtype=np.float64)
    if t.shape != y.shape or t.size == 0:
        raise ValidationError("targets and predictions must align, n >= 1")
    return float(np.sum((t - y) ** 2) / t.size)


@dataclass(frozen=True)
class ScoreMatrix:
    """n blocks (folds) x k treatments (models) of finite scores."""
    values: np.ndarray
    treatments: tuple[str, ...]
    higher_is_better: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != len(self.treatments):
            raise ValidationError("score matrix must be n x k with k treatment labels")
        if not np.all(np.isfinite(v)):
            raise ValidationError("score matrix must be finite")
        object.__setattr__(self, "values", v)


def _average_ranks(row: np.ndarray) -> np.ndarray:
    """Ranks 1..k, best first; ties get average ranks."""
    order = np.argsort(-row, kind="stable")
    ranks = np.empty(len(row), dtype=np.float64)
    i = 0
    while i < len(row):
        j = i
        while j + 1 < len(row) and row[order[j + 1]] == row[order[i]]:
            j += 1
        avg = 0.5 * (i + j) + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


@dataclass(frozen=True)
class FriedmanResult:
    treatments: tuple[str, ...]
    mean_ranks: np.ndarray
    statistic: float
    df: int
    p_value: float
    n_blocks: int


def friedman(scores: ScoreMatrix) -> FriedmanResult:
    """Friedman rank test over the blocks of a score matrix."""
    v = scores.values if scores.higher_is_better else -scores.values
    n, k = v.shape
    if n < 2 or k < 2:
        raise ValidationError(f"need >= 2 blocks and treatments, got {n} x {k}")
    ranks = np.vstack([_average_ranks(v[i]) for i in range(n)])
    mean_ranks = ranks.mean(axis=0)
    stat = 12.0 * n / (k * (k + 1)) * float(np.sum((mean_ranks - (k + 1) / 2.0) ** 2))
    df = k - 1
    p = float(gammaincc(df / 2.0, stat / 2.0))   # chi-square survival function
    return FriedmanResult(treatments=scores.treatments, mean_ranks=mean_ranks,
                          statistic=stat, df=df, p_value=p, n_blocks=n)


@dataclass(frozen=True)
class PairDecision:
    pair: tuple[str, str]
    rank_difference: float
    critical_difference: float
    significant: bool


def bonferroni_critical_difference(k: int, n: int, alpha: float = 0.05) -> float:
    """Two-tailed Bonferroni-Dunn critical mean-rank difference,
    z_{alpha/(2(k-1))} * sqrt(k(k+1)/(6n)); for k=4, n=10, alpha=0.05 this
    is 2.394 * sqrt(1/3) = 1.382."""
    z = float(ndtri(1.0 - alpha / (2.0 * (k - 1))))
    return z * math.sqrt(k * (k + 1) / (6.0 * n))


def bonferroni_pairwise(result: FriedmanResult, alpha: float = 0.05
                        ) -> list[PairDecision]:
    """One-vs-one decisions: significant iff |rank_i - rank_j| > CD."""
    k = len(result.treatments)
    cd = bonferroni_critical_difference(k, result.n_blocks, alpha)
    decisions = []
    for i in range(k):
        for j in range(i + 1, k):
            diff = abs(float(result.mean_ranks[i] - result.mean_ranks[j]))
            decisions.append(PairDecision(
                pair=(result.treatments[i], result.treatments[j]),
                rank_difference=diff,
                critical_difference=cd,
                significant=diff > cd,
            ))
    return decisions


@dataclass(frozen=True)
class EvalReport:
    family: str
    property: str
    fold_r2: tuple[float, ...]      # per-fold test R-square
    fold_eqm: tuple[float, ...]
    fold_val_r2: tuple[float, ...]  # validation scores driving model selection

    @property
    def mean_r2(self) -> float:
        return float(np.mean(self.fold_r2))

    @property
    def mean_eqm(self) -> float:
        return float(np.mean(self.fold_eqm))

    def to_csv(self) -> str:
        from .dataset import fmt
        lines = ["fold,test_r2,test_eqm,val_r2"]
        for i, (r2, e, v) in enumerate(zip(self.fold_r2, self.fold_eqm,
                                           self.fold_val_r2), start=1):
            lines.append(f"{i},{fmt(r2)},{fmt(e)},{fmt(v)}")
        lines.append(f"Média,{fmt(self.mean_r2)},{fmt(self.mean_eqm)},"
                     f"{fmt(float(np.mean(self.fold_val_r2)))}")
        return "\n".join(lines) + "\n"


class FoldFitError(SteelpropError):
    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause


def _run_fold(fit_fn, fold, X, y, X_test, y_test, folds, seed):
    tr = folds.train_indices(fold)
    va = folds.val_indices(fold)
    scaler = fit_scaler(X[tr], y[tr])
    try:
        predictor = fit_fn(X[tr], y[tr], X[va], y[va], scaler, seed ^ fold)
    except Exception as exc:   # propagate with fold attached
        raise FoldFitError(fold, exc) from exc
    val_pred = predictor.predict(X[va])
    test_pred = predictor.predict(X_test)
    return (r_square(y_test, test_pred), eqm(y_test, test_pred),
            r_square(y[va], val_pred), predictor)


def cross_validate(family: str, prop: str, fit_fn,
                   X: np.ndarray, y: np.ndarray,
                   X_test: np.ndarray, y_test: np.ndarray,
                   folds: FoldAssignment, seed: int = 0, jobs: int = 1):
    """Shared-fold protocol: fit on folds != f, validate on f, score on test.

    `fit_fn(X_tr, y_tr, X_val, y_val, scaler, seed)` returns a fitted object
    whose .predict maps raw features to original target units. Jobs > 1
    parallelizes over folds; per-fold seeds are derived as seed ^ fold, so
    parallel results are bit-identical to serial ones.

    Returns (EvalReport, list of per-fold predictors).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    X_test = np.asarray(X_test, dtype=np.float64)
    y_test = np.asarray(y_test, dtype=np.float64)
    fold_ids = list(range(folds.k))
    if jobs > 1:
        results = Parallel(n_jobs=jobs)(
            delayed(_run_fold)(fit_fn, f, X, y, X_test, y_test, folds, seed)
            for f in fold_ids)
    else:
        results = [_run_fold(fit_fn, f, X, y, X_test, y_test, folds, seed)
                   for f in fold_ids]
    report = EvalReport(
        family=family, property=prop,
        fold_r2=tuple(r[0] for r in results),
        fold_eqm=tuple(r[1] for r in results),
        fold_val_r2=tuple(r[2] for r in results),
    )
    return report, [r[3] for r in results]

"""Polynomial ridge regression solved by the normal equations.

Basis ordering is fixed and documented so serialized weights stay portable:

* per-feature basis (default): bias, then for each feature i in input order
  the powers x_i, x_i**2, ..., x_i**degree;
* interaction basis: bias, then all monomials of total degree 1..degree,
  each degree block ordered by the lexicographic index tuple from
  itertools.combinations_with_replacement.

The bias column is never penalized. A (degree, lambda) sweep over shared
folds produces the train/validation curve table used for elbow inspection.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dataset import FoldAssignment, Scaler, fit_scaler
from .errors import NumericalError, ValidationError
from .evalstat import r_square

DEFAULT_LAMBDAS = (0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class PolynomialSpec:
    degree: int
    interactions: bool = False
    lam: float = 0.0

    def __post_init__(self):
        if self.degree not in (1, 2, 3):
            raise ValidationError(f"degree must be 1, 2 or 3, got {self.degree}")
        if self.lam < 0.0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")

    def basis_size(self, n_features: int) -> int:
        if not self.interactions:
            return 1 + n_features * self.degree
        total = 1
        for d in range(1, self.degree + 1):
            total += len(list(itertools.combinations_with_replacement(
                range(n_features), d)))
        return total


def expand_polynomial(x: np.ndarray, spec: PolynomialSpec) -> np.ndarray:
    """Expand one feature vector into the polynomial basis (bias first)."""
    return expand_matrix(np.asarray(x, dtype=np.float64)[None, :], spec)[0]


def expand_matrix(X: np.ndarray, spec: PolynomialSpec) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    n, f = X.shape
    if not spec.interactions:
        cols = [np.ones(n)]
        for i in range(f):
            for d in range(1, spec.degree + 1):
                cols.append(X[:, i] ** d)
        return np.column_stack(cols)
    cols = [np.ones(n)]
    for d in range(1, spec.degree + 1):
        for combo in itertools.combinations_with_replacement(range(f), d):
            col = np.ones(n)
            for i in combo:
                col = col * X[:, i]
            cols.append(col)
    return np.column_stack(cols)


@dataclass(frozen=True)
class LinearModel:
    spec: PolynomialSpec
    weights: np.ndarray          # basis coefficients, bias first
    n_features: int
    scaler: Scaler | None = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValidationError(
                f"expected {self.n_features} features, got {X.shape[1]}")
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return expand_matrix(X, self.spec) @ self.weights


def fit_ridge(X_basis: np.ndarray, y: np.ndarray, lam: float,
              bias_first: bool = True) -> np.ndarray:
    """Solve (X'X + lam*I')w = X'y where I' zeroes the bias row.

    bias_first=True treats column 0 as the (unpenalized) bias; set it False
    for a basis with no bias column, penalizing every coefficient. Cholesky
    first; on failure retry once with diagonal jitter 1e-10 * trace/n. A
    still-singular system raises NumericalError with a condition estimate.
    """
    X_basis = np.asarray(X_basis, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X_basis.ndim != 2 or X_basis.shape[0] != y.shape[0] or y.shape[0] < 1:
        raise ValidationError("basis matrix and targets must align, n >= 1")
    m = X_basis.shape[1]
    A = X_basis.T @ X_basis
    reg = np.full(m, lam)
    if bias_first:
        reg[0] = 0.0
    A = A + np.diag(reg)
    b = X_basis.T @ y
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        jitter = 1e-10 * np.trace(A) / m
        try:
            L = np.linalg.cholesky(A + jitter * np.eye(m))
        except np.linalg.LinAlgError:
            raise NumericalError(
                "normal equations singular after jitter; "
                f"condition estimate {np.linalg.cond(A):.3e}") from None
    w = np.linalg.solve(L.T, np.linalg.solve(L, b))
    return w


def fit_linear_model(X: np.ndarray, y: np.ndarray, spec: PolynomialSpec,
                     scaler: Scaler | None = None) -> LinearModel:
    """Fit on raw features: scale (if scaler given), expand, solve ridge."""
    X = np.asarray(X, dtype=np.float64)
    Xs = scaler.transform(X) if scaler is not None else X
    w = fit_ridge(expand_matrix(Xs, spec), y, spec.lam)
    return LinearModel(spec=spec, weights=w, n_features=X.shape[1], scaler=scaler)


SERIAL_VERSION = "steelprop-linear/1"


def serialize(model: LinearModel) -> str:
    from .dataset import fmt
    lines = [SERIAL_VERSION,
             f"spec degree={model.spec.degree} "
             f"interactions={int(model.spec.interactions)} lam={fmt(model.spec.lam)}",
             f"n_features {model.n_features}"]
    if model.scaler is None:
        lines.append("scaler none")
    else:
        s = model.scaler
        lines.append("scaler "
                     + " ".join(fmt(v) for v in s.feature_min) + " | "
                     + " ".join(fmt(v) for v in s.feature_max) + " | "
                     + f"{fmt(s.target_mean)} {fmt(s.target_std)}")
    lines.append("weights " + " ".join(fmt(w) for w in model.weights))
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> LinearModel:
    from .dataset import Scaler
    from .errors import DataError
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != SERIAL_VERSION:
        raise DataError(f"unsupported model format, expected {SERIAL_VERSION!r}")
    fields = {}
    for ln in lines[1:]:
        head, _, rest = ln.partition(" ")
        fields[head] = rest
    sparts = dict(p.split("=") for p in fields["spec"].split())
    spec = PolynomialSpec(degree=int(sparts["degree"]),
                          interactions=bool(int(sparts["interactions"])),
                          lam=float(sparts["lam"]))
    scaler = None
    if fields["scaler"] != "none":
        lo, hi, tail = fields["scaler"].split(" | ")
        mean, std = tail.split()
        scaler = Scaler(feature_min=np.array([float(v) for v in lo.split()]),
                        feature_max=np.array([float(v) for v in hi.split()]),
                        target_mean=float(mean), target_std=float(std))
    return LinearModel(spec=spec,
                       weights=np.array([float(v) for v in fields["weights"].split()]),
                       n_features=int(fields["n_features"]), scaler=scaler)


@dataclass(frozen=True)
class CurveRow:
    degree: int
    lam: float
    train_r2: float
    val_r2: float


@dataclass(frozen=True)
class CurveTable:
    rows: tuple[CurveRow, ...]
    best: CurveRow              # argmax validation R-square

    def to_csv(self) -> str:
        from .dataset import fmt
        lines = ["degree,lambda,train_r2,val_r2"]
        for r in self.rows:
            lines.append(f"{r.degree},{fmt(r.lam)},{fmt(r.train_r2)},{fmt(r.val_r2)}")
        return "\n".join(lines) + "\n"


def sweep(X: np.ndarray, y: np.ndarray, folds: FoldAssignment,
          degrees=(1, 2, 3), lambdas=DEFAULT_LAMBDAS,
          interactions: bool = False) -> CurveTable:
    """Mean train/val R-square per (degree, lambda) cell over the folds.

    The table is meant for human elbow inspection; `best` holds the argmax
    validation cell as the automatic default.
    """
    if not degrees or not lambdas:
        raise ValidationError("degree and lambda grids must be non-empty")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rows = []
    for degree in degrees:
        for lam in lambdas:
            spec = PolynomialSpec(degree=degree, lam=lam, interactions=interactions)
            tr_scores, val_scores = [], []
            for fold in range(folds.k):
                tr = folds.train_indices(fold)
                va = folds.val_indices(fold)
                scaler = fit_scaler(X[tr], y[tr])
                model = fit_linear_model(X[tr], y[tr], spec, scaler)
                tr_scores.append(r_square(y[tr], model.predict(X[tr])))
                val_scores.append(r_square(y[va], model.predict(X[va])))
            rows.append(CurveRow(degree, float(lam),
                                 float(np.mean(tr_scores)), float(np.mean(val_scores))))
    best = max(rows, key=lambda r: r.val_r2)
    return CurveTable(rows=tuple(rows), best=best)

"""Epsilon-insensitive support vector regression trained by SMO.

The dual is solved over the 2n variables (alpha, alpha*) with the single
equality constraint sum(alpha - alpha*) = 0 and box [0, C]. Each iteration
picks the maximal-KKT-violating pair (first-order working-set selection),
solves the two-variable subproblem analytically and updates the cached
fitted values. Kernel rows are memoized in an LRU cache with a configurable
memory cap. The stopping gap bounds the per-sample KKT violation, which
`kkt_violation` re-derives independently from scratch.

Non-convergence within `max_passes` pair updates is reported as a warning
flag on the model, never an exception, so cross-validation sweeps always
complete.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._accel import maybe_jit
from .dataset import Scaler, fmt
from .errors import DataError, ValidationError

KERNEL_KINDS = ("linear", "polynomial", "gaussian")
_KIND_CODE = {"linear": 0, "polynomial": 1, "gaussian": 2}


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    degree: int = 3          # polynomial only
    gamma: float | None = None   # gaussian scale; None = 1/(n_features * var)
    coef0: float = 1.0       # polynomial offset

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValidationError(f"unknown kernel: {self.kind}")
        if self.degree < 1:
            raise ValidationError("degree must be >= 1")
        if self.gamma is not None and self.gamma <= 0.0:
            raise ValidationError("gamma must be > 0")


@dataclass(frozen=True)
class SvrParams:
    C: float = 1.0
    epsilon: float = 0.1
    tolerance: float = 1e-3
    max_passes: int = 200_000
    cache_mb: float = 64.0

    def __post_init__(self):
        if self.C <= 0.0:
            raise ValidationError("C must be > 0")
        if self.epsilon < 0.0:
            raise ValidationError("epsilon must be >= 0")
        if self.tolerance <= 0.0 or self.max_passes < 1:
            raise ValidationError("tolerance must be > 0 and max_passes >= 1")


def kernel_eval(spec: KernelSpec, x, z) -> float:
    """Single kernel value; gamma must be resolved for gaussian."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise ValidationError(f"arity mismatch: {x.shape} vs {z.shape}")
    if spec.kind == "linear":
        return float(x @ z)
    if spec.kind == "polynomial":
        return float((x @ z + spec.coef0) ** spec.degree)
    gamma = spec.gamma if spec.gamma is not None else 1.0 / max(len(x), 1)
    diff = x - z
    return float(math.exp(-gamma * float(diff @ diff)))


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Dense kernel block K[a, b] = k(A[a], B[b])."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise ValidationError(f"arity mismatch: {A.shape[1]} vs {B.shape[1]}")
    dots = A @ B.T
    if spec.kind == "linear":
        return dots
    if spec.kind == "polynomial":
        return (dots + spec.coef0) ** spec.degree
    gamma = spec.gamma if spec.gamma is not None else 1.0 / max(A.shape[1], 1)
    sq_a = np.sum(A * A, axis=1)[:, None]
    sq_b = np.sum(B * B, axis=1)[None, :]
    d2 = np.maximum(sq_a + sq_b - 2.0 * dots, 0.0)
    return np.exp(-gamma * d2)


@maybe_jit
def _kernel_row_into(X, sqn, r, kind, degree, gamma, coef0, out):
    dots = X @ X[r]
    if kind == 0:
        out[:] = dots
    elif kind == 1:
        out[:] = (dots + coef0) ** degree
    else:
        out[:] = np.exp(-gamma * np.maximum(sqn + sqn[r] - 2.0 * dots, 0.0))


@maybe_jit
def _smo(X, y, C, eps, tol, max_iter, kind, degree, gamma, coef0, cache_slots):
    """Maximal-violating-pair SMO for the epsilon-SVR dual.

    State is kept per underlying sample: theta_a/theta_s are the alpha and
    alpha* vectors, F the bias-free fitted values sum(beta_s * K[s, t]).
    Returns (beta, bias, iterations, final_gap, converged).
    """
    n = X.shape[0]
    n_feat = X.shape[1]
    sqn = np.empty(n)
    for t in range(n):
        acc = 0.0
        for q in range(n_feat):
            acc += X[t, q] * X[t, q]
        sqn[t] = acc

    theta_a = np.zeros(n)
    theta_s = np.zeros(n)
    F = np.zeros(n)

    cache = np.empty((cache_slots, n))
    slot_of_row = np.full(n, -1, np.int64)
    row_of_slot = np.full(cache_slots, -1, np.int64)
    stamp = np.zeros(cache_slots, np.int64)
    tick = 0

    it = 0
    gap = np.inf
    converged = False
    while it < max_iter:
        resid = y - F
        lo_a = resid - eps      # -d*G on the alpha side
        hi_s = resid + eps      # -d*G on the alpha* side

        up_a = lo_a.copy()
        up_a[theta_a >= C] = -np.inf
        up_s = hi_s.copy()
        up_s[theta_s <= 0.0] = -np.inf
        ia = int(np.argmax(up_a))
        ks = int(np.argmax(up_s))
        if up_a[ia] >= up_s[ks]:
            ri, i_side, m = ia, 0, up_a[ia]
        else:
            ri, i_side, m = ks, 1, up_s[ks]

        low_a = lo_a.copy()
        low_a[theta_a <= 0.0] = np.inf
        low_s = hi_s.copy()
        low_s[theta_s >= C] = np.inf
        ja = int(np.argmin(low_a))
        js = int(np.argmin(low_s))
        if low_a[ja] <= low_s[js]:
            rj, j_side, M = ja, 0, low_a[ja]
        else:
            rj, j_side, M = js, 1, low_s[js]

        gap = m - M
        if gap <= tol:
            converged = True
            break

        # fetch kernel rows for ri then rj; the LRU victim can never be the
        # row just touched as long as there are >= 2 slots
        for which in range(2):
            r = ri if which == 0 else rj
            if slot_of_row[r] < 0:
                victim = 0
                oldest = stamp[0]
                for s in range(1, cache_slots):
                    if stamp[s] < oldest:
                        oldest = stamp[s]
                        victim = s
                old_row = row_of_slot[victim]
                if old_row >= 0:
                    slot_of_row[old_row] = -1
                _kernel_row_into(X, sqn, r, kind, degree, gamma, coef0,
                                 cache[victim])
                row_of_slot[victim] = r
                slot_of_row[r] = victim
            tick += 1
            stamp[slot_of_row[r]] = tick
        Ki = cache[slot_of_row[ri]]
        Kj = cache[slot_of_row[rj]]

        quad = Ki[ri] + Kj[rj] - 2.0 * Ki[rj]
        if quad <= 0.0:
            quad = 1e-12

        if i_side == 0:
            d_i, g_i, th_i = 1.0, eps - resid[ri], theta_a[ri]
        else:
            d_i, g_i, th_i = -1.0, resid[ri] + eps, theta_s[ri]
        if j_side == 0:
            d_j, g_j, th_j = 1.0, eps - resid[rj], theta_a[rj]
        else:
            d_j, g_j, th_j = -1.0, resid[rj] + eps, theta_s[rj]
        old_i = th_i
        old_j = th_j

        if d_i != d_j:
            delta = (-g_i - g_j) / quad
            diff = th_i - th_j
            th_i += delta
            th_j += delta
            if diff > 0.0:
                if th_j < 0.0:
                    th_j = 0.0
                    th_i = diff
            else:
                if th_i < 0.0:
                    th_i = 0.0
                    th_j = -diff
            if diff > 0.0:
                if th_i > C:
                    th_i = C
                    th_j = C - diff
            else:
                if th_j > C:
                    th_j = C
                    th_i = C + diff
        else:
            delta = (g_i - g_j) / quad
            total = th_i + th_j
            th_i -= delta
            th_j += delta
            if total > C:
                if th_i > C:
                    th_i = C
                    th_j = total - C
            else:
                if th_j < 0.0:
                    th_j = 0.0
                    th_i = total
            if total > C:
                if th_j > C:
                    th_j = C
                    th_i = total - C
            else:
                if th_i < 0.0:
                    th_i = 0.0
                    th_j = total

        if i_side == 0:
            theta_a[ri] = th_i
        else:
            theta_s[ri] = th_i
        if j_side == 0:
            theta_a[rj] = th_j
        else:
            theta_s[rj] = th_j

        dbeta_i = d_i * (th_i - old_i)
        dbeta_j = d_j * (th_j - old_j)
        F += dbeta_i * Ki + dbeta_j * Kj
        it += 1

    # bias: average -d*G over free duals, else midpoint of the final bounds
    resid = y - F
    lo_a = resid - eps
    hi_s = resid + eps
    free_a = (theta_a > 0.0) & (theta_a < C)
    free_s = (theta_s > 0.0) & (theta_s < C)
    n_free = int(np.sum(free_a)) + int(np.sum(free_s))
    if n_free > 0:
        b = (np.sum(lo_a[free_a]) + np.sum(hi_s[free_s])) / n_free
    else:
        up_a = lo_a.copy()
        up_a[theta_a >= C] = -np.inf
        up_s = hi_s.copy()
        up_s[theta_s <= 0.0] = -np.inf
        m = max(np.max(up_a), np.max(up_s))
        low_a = lo_a.copy()
        low_a[theta_a <= 0.0] = np.inf
        low_s = hi_s.copy()
        low_s[theta_s >= C] = np.inf
        M = min(np.min(low_a), np.min(low_s))
        if np.isfinite(m) and np.isfinite(M):
            b = 0.5 * (m + M)
        elif np.isfinite(m):
            b = m
        elif np.isfinite(M):
            b = M
        else:
            b = 0.0

    beta = theta_a - theta_s
    return beta, b, it, gap, converged


@dataclass
class SvrModel:
    kernel: KernelSpec
    params: SvrParams
    support_vectors: np.ndarray   # (n_sv, n_features) scaled rows
    coef: np.ndarray              # alpha - alpha* per support vector
    sv_index: np.ndarray          # positions in the training set
    bias: float
    n_train: int
    converged: bool
    iterations: int
    solver_gap: float
    scaler: Scaler | None = None

    def predict_scaled(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], self.bias)
        K = kernel_matrix(self.kernel, X, self.support_vectors)
        return K @ self.coef + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Raw features in, original target units out (via the fold scaler)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.scaler is not None:
            X = self.scaler.transform(X)
        out = self.predict_scaled(X)
        if self.scaler is not None:
            out = self.scaler.inverse_targets(out)
        return out


def resolve_gamma(kernel: KernelSpec, X: np.ndarray) -> KernelSpec:
    """Fill in the data-driven default gamma = 1/(n_features * var(X))."""
    if kernel.kind != "gaussian" or kernel.gamma is not None:
        return kernel
    var = float(np.var(X))
    gamma = 1.0 / (X.shape[1] * var) if var > 0.0 else 1.0 / X.shape[1]
    return KernelSpec(kind=kernel.kind, degree=kernel.degree,
                      gamma=gamma, coef0=kernel.coef0)


def fit_svr(X: np.ndarray, y: np.ndarray, kernel: KernelSpec = KernelSpec(),
            params: SvrParams = SvrParams(),
            scaler: Scaler | None = None) -> SvrModel:
    """Run SMO on (scaled) training data and package the support expansion."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValidationError("X must be 2-D and aligned with y")
    if X.shape[0] < 2:
        raise ValidationError("need at least 2 samples")
    kernel = resolve_gamma(kernel, X)
    n = X.shape[0]
    slots = int(params.cache_mb * 2**20 / (8 * n))
    slots = max(2, min(n, slots))
    beta, bias, iters, gap, converged = _smo(
        X, y, float(params.C), float(params.epsilon), float(params.tolerance),
        int(params.max_passes), _KIND_CODE[kernel.kind], int(kernel.degree),
        float(kernel.gamma if kernel.gamma is not None else 0.0),
        float(kernel.coef0), slots)
    if not converged:
        warnings.warn(
            f"SMO stopped at max_passes={params.max_passes} with KKT gap "
            f"{gap:.3e} > tolerance {params.tolerance:.1e}", RuntimeWarning)
    sv = np.flatnonzero(beta != 0.0)
    return SvrModel(
        kernel=kernel, params=params,
        support_vectors=X[sv].copy(), coef=beta[sv].copy(), sv_index=sv,
        bias=float(bias), n_train=n, converged=bool(converged),
        iterations=int(iters), solver_gap=float(max(gap, 0.0)),
        scaler=scaler)


def kkt_violation(model: SvrModel, X: np.ndarray, y: np.ndarray) -> float:
    """Max epsilon-KKT residual over the training set, recomputed from
    scratch (fresh kernel sums, no solver state)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    beta = np.zeros(model.n_train)
    beta[model.sv_index] = model.coef
    f = model.predict_scaled(X)
    err = f - y
    C = model.params.C
    eps = model.params.epsilon
    bound_tol = 1e-12 * max(C, 1.0)
    worst = 0.0
    for i in range(len(y)):
        b = beta[i]
        e = err[i]
        if abs(b) <= bound_tol:
            v = max(0.0, abs(e) - eps)
        elif b >= C - bound_tol:
            v = max(0.0, e + eps)
        elif b > 0.0:
            v = abs(e + eps)
        elif b <= -C + bound_tol:
            v = max(0.0, eps - e)
        else:
            v = abs(e - eps)
        worst = max(worst, v)
    return worst


def dual_objective(model: SvrModel, X: np.ndarray, y: np.ndarray) -> float:
    """0.5 b'Kb - y'b + eps*sum|b| for the fitted dual (minimization form)."""
    X = np.asarray(X, dtype=np.float64)
    beta = np.zeros(model.n_train)
    beta[model.sv_index] = model.coef
    K = kernel_matrix(model.kernel, X, X)
    return float(0.5 * beta @ K @ beta - y @ beta
                 + model.params.epsilon * np.sum(np.abs(beta)))


SERIAL_VERSION = "steelprop-svr/1"


def serialize(model: SvrModel) -> str:
    """Versioned structured-text serialization of a fitted model."""
    lines = [SERIAL_VERSION]
    k = model.kernel
    lines.append(f"kernel {k.kind} degree={k.degree} "
                 f"gamma={fmt(k.gamma) if k.gamma is not None else 'none'} "
                 f"coef0={fmt(k.coef0)}")
    p = model.params
    lines.append(f"params C={fmt(p.C)} epsilon={fmt(p.epsilon)} "
                 f"tolerance={fmt(p.tolerance)} max_passes={p.max_passes}")
    lines.append(f"bias {fmt(model.bias)}")
    lines.append(f"n_train {model.n_train}")
    lines.append(f"converged {int(model.converged)}")
    if model.scaler is None:
        lines.append("scaler none")
    else:
        s = model.scaler
        lines.append("scaler "
                     + " ".join(fmt(v) for v in s.feature_min) + " | "
                     + " ".join(fmt(v) for v in s.feature_max) + " | "
                     + f"{fmt(s.target_mean)} {fmt(s.target_std)}")
    lines.append(f"n_sv {len(model.coef)}")
    for idx, c, row in zip(model.sv_index, model.coef, model.support_vectors):
        lines.append(f"sv {idx} {fmt(c)} " + " ".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> SvrModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != SERIAL_VERSION:
        raise DataError(f"unsupported model format, expected {SERIAL_VERSION!r}")
    fields = {}
    sv_rows = []
    for ln in lines[1:]:
        head, _, rest = ln.partition(" ")
        if head == "sv":
            sv_rows.append(rest.split())
        else:
            fields[head] = rest
    kparts = dict(p.split("=") for p in fields["kernel"].split()[1:])
    kernel = KernelSpec(
        kind=fields["kernel"].split()[0],
        degree=int(kparts["degree"]),
        gamma=None if kparts["gamma"] == "none" else float(kparts["gamma"]),
        coef0=float(kparts["coef0"]))
    pparts = dict(p.split("=") for p in fields["params"].split())
    params = SvrParams(C=float(pparts["C"]), epsilon=float(pparts["epsilon"]),
                       tolerance=float(pparts["tolerance"]),
                       max_passes=int(pparts["max_passes"]))
    scaler = None
    if fields["scaler"] != "none":
        lo, hi, tail = fields["scaler"].split(" | ")
        mean, std = tail.split()
        scaler = Scaler(feature_min=np.array([float(v) for v in lo.split()]),
                        feature_max=np.array([float(v) for v in hi.split()]),
                        target_mean=float(mean), target_std=float(std))
    sv_index = np.array([int(r[0]) for r in sv_rows], dtype=np.int64)
    coef = np.array([float(r[1]) for r in sv_rows])
    vectors = np.array([[float(v) for v in r[2:]] for r in sv_rows])
    if len(sv_rows) == 0:
        vectors = np.zeros((0, 0))
    return SvrModel(kernel=kernel, params=params, support_vectors=vectors,
                    coef=coef, sv_index=sv_index, bias=float(fields["bias"]),
                    n_train=int(fields["n_train"]),
                    converged=bool(int(fields["converged"])),
                    iterations=0, solver_gap=0.0, scaler=scaler)

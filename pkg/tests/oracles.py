"""Independent reference implementations used as test oracles.

Everything here is deliberately naive: explicit inverses, dense projected
gradient, finite differences, region scans. These never share code with the
paths they check.
"""

import math

import numpy as np


def ridge_explicit_inverse(X, y, lam):
    """Normal-equation solve by explicit matrix inverse (bias unpenalized)."""
    m = X.shape[1]
    reg = lam * np.eye(m)
    reg[0, 0] = 0.0
    return np.linalg.inv(X.T @ X + reg) @ (X.T @ y)


def fd_gradient(loss_fn, theta, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        tp = theta.copy()
        tm = theta.copy()
        tp[i] += h
        tm[i] -= h
        g[i] = (loss_fn(tp) - loss_fn(tm)) / (2.0 * h)
    return g


def gaussian_kernel_loops(X, gamma):
    """Gaussian Gram matrix with explicit loops (no shared code paths)."""
    n = X.shape[0]
    K = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            d2 = 0.0
            for q in range(X.shape[1]):
                diff = X[a, q] - X[b, q]
                d2 += diff * diff
            K[a, b] = math.exp(-gamma * d2)
    return K


def linear_kernel_loops(X):
    n = X.shape[0]
    K = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            K[a, b] = float(np.dot(X[a], X[b]))
    return K


def poly_kernel_loops(X, degree, coef0):
    n = X.shape[0]
    K = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            K[a, b] = (float(np.dot(X[a], X[b])) + coef0) ** degree
    return K


def svr_dual_objective(K, y, beta, eps):
    """0.5 b'Kb - y'b + eps sum|b|, the epsilon-SVR dual in beta form."""
    return float(0.5 * beta @ K @ beta - y @ beta + eps * np.sum(np.abs(beta)))


def _project_box_hyperplane(v, d, C):
    """Euclidean projection onto {0 <= t <= C} intersect {d.t = 0}
    by bisection on the hyperplane multiplier."""
    lo = -(np.max(np.abs(v)) + C + 1.0)
    hi = -lo

    def h(nu):
        return float(d @ np.clip(v - nu * d, 0.0, C))

    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi) * d, 0.0, C)


def svr_dual_solve_pg(K, y, C, eps, iters=12_000):
    """Projected-gradient solve of the SVR dual over (alpha, alpha*).

    Returns (beta, objective). Slow and simple on purpose.
    """
    n = len(y)
    d = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([eps - y, eps + y])
    Q = np.block([[K, -K], [-K, K]])
    L = float(np.max(np.linalg.eigvalsh(Q)))
    step = 1.0 / max(L, 1e-12)
    theta = _project_box_hyperplane(np.zeros(2 * n), d, C)
    for _ in range(iters):
        grad = Q @ theta + p
        theta = _project_box_hyperplane(theta - step * grad, d, C)
    beta = theta[:n] - theta[n:]
    return beta, svr_dual_objective(K, y, beta, eps)


def tree_leaf_regions(root, lo, hi):
    """Enumerate leaves as (bounds_lo, bounds_hi, value) hyperrectangles."""
    regions = []

    def walk(node, b_lo, b_hi):
        if node.is_leaf:
            regions.append((b_lo.copy(), b_hi.copy(), node.value))
            return
        j, t = node.feature, node.threshold
        left_hi = b_hi.copy()
        left_hi[j] = min(left_hi[j], t)
        walk(node.left, b_lo, left_hi)
        right_lo = b_lo.copy()
        right_lo[j] = max(right_lo[j], t)
        walk(node.right, right_lo, b_hi)

    walk(root, np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    return regions


def tree_region_predict(regions, x):
    """Linear scan over leaf regions: lo < x <= hi per split dimension."""
    for b_lo, b_hi, value in regions:
        if np.all(x > b_lo) and np.all(x <= b_hi):
            return value
    raise AssertionError(f"point {x} not covered by any leaf region")


def augment_count_by_enumeration(records):
    """Combinatorial expectation: prod(2 per ranged element) per record."""
    total = 0
    for rec in records:
        combos = 1
        for elem, spec in rec.composition.items():
            if spec.min != spec.max:
                combos *= 2
        total += combos
    return total

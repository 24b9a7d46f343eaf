"""CART-style regression tree: grow to purity, weakest-link prune, select
the subtree whose train/validation R-square agree.

Splits minimize child SSE over every feature and every midpoint between
consecutive distinct sorted values; ties route left (x <= threshold). The
prune sequence collapses, at each step, all internal nodes attaining the
minimal cost-complexity ratio

    g(v) = (SSE_leaf(v) - SSE_subtree(v)) / (leaves(v) - 1)

which makes the recorded alphas strictly increasing down to the root stump.
Collapses are path-copies, so every sequence entry is an independent,
immutable snapshot sharing untouched branches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import maybe_jit
from .dataset import fmt
from .errors import DataError, ValidationError


@maybe_jit
def _best_split(X, y, min_leaf):
    """Best (feature, threshold) by SSE reduction; feature -1 when none.

    Targets are centered on the node mean before the prefix-sum scan: the
    reduction is shift-invariant and centering avoids the catastrophic
    cancellation that otherwise turns pure nodes into fake split candidates.
    """
    n = X.shape[0]
    s1 = 0.0
    for t in range(n):
        s1 += y[t]
    mu = s1 / n
    yc = np.empty(n)
    c1_total = 0.0
    c2_total = 0.0
    for t in range(n):
        yc[t] = y[t] - mu
        c1_total += yc[t]
        c2_total += yc[t] * yc[t]
    parent_sse = c2_total - c1_total * c1_total / n
    best_red = 0.0
    best_feat = -1
    best_thr = 0.0
    if n < 2 * min_leaf or n < 2:
        return best_feat, best_thr, best_red, parent_sse
    guard = 1e-12 * max(1.0, abs(parent_sse))
    left_n = np.arange(1, n).astype(np.float64)
    right_n = n - left_n
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="mergesort")
        xs = X[:, j][order]
        ys = yc[order]
        c1 = np.cumsum(ys)[:-1]
        c2 = np.cumsum(ys * ys)[:-1]
        sse_l = c2 - c1 * c1 / left_n
        sse_r = (c2_total - c2) - (c1_total - c1) * (c1_total - c1) / right_n
        red = parent_sse - sse_l - sse_r
        red[xs[1:] <= xs[:-1]] = -np.inf          # no boundary between ties
        red[left_n < min_leaf] = -np.inf
        red[right_n < min_leaf] = -np.inf
        i = int(np.argmax(red))
        if red[i] > best_red and red[i] > guard:
            best_red = red[i]
            best_feat = j
            best_thr = 0.5 * (xs[i] + xs[i + 1])
    return best_feat, best_thr, best_red, parent_sse


@maybe_jit
def _route(features, thresholds, lefts, rights, values, X, out):
    for s in range(X.shape[0]):
        node = 0
        while lefts[node] >= 0:
            if X[s, features[node]] <= thresholds[node]:
                node = lefts[node]
            else:
                node = rights[node]
        out[s] = values[node]


@dataclass
class TreeNode:
    value: float            # mean of routed training targets
    n_samples: int
    sse: float              # SSE of this node treated as a leaf
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def n_leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.n_leaves() + self.right.n_leaves()

    def subtree_sse(self) -> float:
        if self.is_leaf:
            return self.sse
        return self.left.subtree_sse() + self.right.subtree_sse()


@dataclass(frozen=True)
class TreeParams:
    min_leaf: int = 1
    max_depth: int | None = None

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ValidationError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValidationError("max_depth must be >= 0")


def grow(X: np.ndarray, y: np.ndarray, params: TreeParams = TreeParams()) -> TreeNode:
    """Grow greedily until no split reduces SSE (or limits are hit)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 1:
        raise ValidationError("X must be 2-D and aligned with y, n >= 1")
    max_depth = params.max_depth if params.max_depth is not None else np.inf

    def build(rows: np.ndarray, depth: int) -> TreeNode:
        yn = y[rows]
        value = float(np.mean(yn))
        sse = float(np.sum((yn - value) ** 2))
        node = TreeNode(value=value, n_samples=len(rows), sse=sse)
        if depth >= max_depth or len(rows) < 2:
            return node
        feat, thr, red, _ = _best_split(X[rows], yn, params.min_leaf)
        if feat < 0:
            return node
        mask = X[rows, feat] <= thr
        node.feature = int(feat)
        node.threshold = float(thr)
        node.left = build(rows[mask], depth + 1)
        node.right = build(rows[~mask], depth + 1)
        return node

    return build(np.arange(X.shape[0]), 0)


def _flatten(root: TreeNode):
    features, thresholds, lefts, rights, values = [], [], [], [], []

    def visit(node: TreeNode) -> int:
        idx = len(features)
        features.append(node.feature)
        thresholds.append(node.threshold)
        lefts.append(-1)
        rights.append(-1)
        values.append(node.value)
        if not node.is_leaf:
            lefts[idx] = visit(node.left)
            rights[idx] = visit(node.right)
        return idx

    visit(root)
    return (np.array(features, dtype=np.int64),
            np.array(thresholds, dtype=np.float64),
            np.array(lefts, dtype=np.int64),
            np.array(rights, dtype=np.int64),
            np.array(values, dtype=np.float64))


def predict(root: TreeNode, X: np.ndarray, n_features: int | None = None) -> np.ndarray:
    """Route rows by threshold comparisons; ties (==) go left."""
    X = np.atleast_2d(np.ascontiguousarray(X, dtype=np.float64))
    if n_features is not None and X.shape[1] != n_features:
        raise ValidationError(f"expected {n_features} features, got {X.shape[1]}")
    arrays = _flatten(root)
    out = np.empty(X.shape[0])
    _route(*arrays, X, out)
    return out


@dataclass(frozen=True)
class PrunedEntry:
    alpha: float
    root: TreeNode
    n_leaves: int


@dataclass(frozen=True)
class PruneSequence:
    entries: tuple[PrunedEntry, ...]   # decreasing leaf counts, increasing alpha


def _collapse(node: TreeNode, doomed: set[int]) -> TreeNode:
    """Path-copied subtree with every doomed internal node turned into a leaf."""
    if id(node) in doomed:
        return TreeNode(value=node.value, n_samples=node.n_samples, sse=node.sse)
    if node.is_leaf:
        return node
    left = _collapse(node.left, doomed)
    right = _collapse(node.right, doomed)
    if left is node.left and right is node.right:
        return node
    return TreeNode(value=node.value, n_samples=node.n_samples, sse=node.sse,
                    feature=node.feature, threshold=node.threshold,
                    left=left, right=right)


def prune_sequence(root: TreeNode, X: np.ndarray, y: np.ndarray) -> PruneSequence:
    """Weakest-link cost-complexity sequence from the full tree to the stump."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise ValidationError("X and y must align")
    entries = [PrunedEntry(alpha=0.0, root=root, n_leaves=root.n_leaves())]
    current = root
    while not current.is_leaf:
        links: list[tuple[float, TreeNode]] = []

        def scan(node: TreeNode):
            if node.is_leaf:
                return
            g = (node.sse - node.subtree_sse()) / (node.n_leaves() - 1)
            links.append((g, node))
            scan(node.left)
            scan(node.right)

        scan(current)
        g_min = min(g for g, _ in links)
        tol = 1e-12 * max(1.0, abs(g_min))
        doomed = {id(node) for g, node in links if g <= g_min + tol}
        current = _collapse(current, doomed)
        entries.append(PrunedEntry(alpha=float(g_min), root=current,
                                   n_leaves=current.n_leaves()))
    return PruneSequence(entries=tuple(entries))


def select_pruned(seq: PruneSequence, X_train, y_train, X_val, y_val,
                  gap_tol: float = 0.05) -> TreeNode:
    """Largest subtree with |train R2 - val R2| <= gap_tol, else the
    subtree maximizing validation R2."""
    from .evalstat import r_square
    if not seq.entries:
        raise ValidationError("empty prune sequence")
    y_val = np.asarray(y_val, dtype=np.float64)
    if y_val.size == 0:
        raise ValidationError("empty validation set")
    best_val = -np.inf
    best_root = seq.entries[0].root
    for entry in seq.entries:
        tr_r2 = r_square(y_train, predict(entry.root, X_train))
        val_r2 = r_square(y_val, predict(entry.root, X_val))
        if abs(tr_r2 - val_r2) <= gap_tol:
            return entry.root
        if val_r2 > best_val:
            best_val = val_r2
            best_root = entry.root
    return best_root


@dataclass
class TreePredictor:
    """Pruned tree behind the uniform predict contract (raw units both ways)."""
    root: TreeNode
    n_features: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict(self.root, X, self.n_features)


SERIAL_VERSION = "steelprop-tree/1"


def serialize(root: TreeNode) -> str:
    """Preorder node list, one line per node."""
    lines = [SERIAL_VERSION]

    def visit(node: TreeNode):
        if node.is_leaf:
            lines.append(f"leaf {fmt(node.value)} {node.n_samples} {fmt(node.sse)}")
        else:
            lines.append(f"node {node.feature} {fmt(node.threshold)} "
                         f"{fmt(node.value)} {node.n_samples} {fmt(node.sse)}")
            visit(node.left)
            visit(node.right)

    visit(root)
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> TreeNode:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != SERIAL_VERSION:
        raise DataError(f"unsupported tree format, expected {SERIAL_VERSION!r}")
    pos = 1

    def build() -> TreeNode:
        nonlocal pos
        if pos >= len(lines):
            raise DataError("truncated tree serialization")
        parts = lines[pos].split()
        pos += 1
        if parts[0] == "leaf":
            return TreeNode(value=float(parts[1]), n_samples=int(parts[2]),
                            sse=float(parts[3]))
        if parts[0] != "node":
            raise DataError(f"bad tree line: {lines[pos - 1]!r}")
        node = TreeNode(value=float(parts[3]), n_samples=int(parts[4]),
                        sse=float(parts[5]), feature=int(parts[1]),
                        threshold=float(parts[2]))
        node.left = build()
        node.right = build()
        return node

    root = build()
    if pos != len(lines):
        raise DataError("trailing data in tree serialization")
    return root

"""Binary regression trees with ridge-fitted linear leaf models.

Structure search is plain greedy CART: every candidate threshold (midpoints
between consecutive distinct sorted values) is scored with the Friedman MSE
improvement ``i^2 = nL*nR/(nL+nR) * (meanL - meanR)^2`` and the maximum wins,
ties broken by lowest feature index then lowest threshold.  Splitting uses
constant-leaf statistics even when leaves end up linear: the structure is
frozen first, then every leaf is refit.

In linear mode a leaf restricts the samples to the features that appear on
its decision path, extends them with a constant and squared terms, and fits
the weights by ridge regression.  That makes the tree differentiable almost
everywhere with a closed-form gradient, which is what the layered training
in :mod:`stackboost.stack` relies on.

Routing rule: values <= threshold go left, > goes right.  The rule is fixed
and serialized with the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, EmptyInputError, NonFiniteInputError
from .linalg import ridge_solve

Array = np.ndarray

LEAF_CONSTANT = "constant"
LEAF_LINEAR = "linear"


@dataclass
class TreeParams:
    """Growth and leaf-fit settings for a single tree."""

    max_depth: int
    min_samples_leaf: int = 8
    min_samples_split: int = 16
    ridge_lambda: float = 0.1
    leaf_mode: str = LEAF_LINEAR

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if self.min_samples_split < 2 * self.min_samples_leaf:
            raise ValueError(
                f"min_samples_split ({self.min_samples_split}) must be >= "
                f"2 * min_samples_leaf ({self.min_samples_leaf})"
            )
        if self.ridge_lambda < 0:
            raise ValueError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
        if self.leaf_mode not in (LEAF_CONSTANT, LEAF_LINEAR):
            raise ValueError(f"unknown leaf_mode {self.leaf_mode!r}")


@dataclass
class LeafModel:
    """Terminal node: a constant, or ridge weights over extended features.

    In linear mode ``weights`` has length ``2 * len(selected_features) + 1``
    laid out as [bias, linear terms, squared terms].
    """

    mode: str
    constant_value: float = 0.0
    selected_features: list[int] = field(default_factory=list)
    weights: Array | None = None

    def predict(self, x_sel: Array) -> float:
        if self.mode == LEAF_CONSTANT:
            return self.constant_value
        return float(extend_features(x_sel) @ self.weights)


@dataclass
class SplitNode:
    feature: int
    threshold: float
    left: "SplitNode | LeafModel"
    right: "SplitNode | LeafModel"


@dataclass
class DecisionTree:
    """Fitted tree; immutable after construction, safe for concurrent reads."""

    root: SplitNode | LeafModel
    input_dim: int
    depth: int

    def predict_row(self, x: Array) -> float:
        """Prediction for a single sample."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise DimensionMismatchError(
                f"expected vector of length {self.input_dim}, got shape {x.shape}"
            )
        leaf = self.route(x)
        if leaf.mode == LEAF_CONSTANT:
            return leaf.constant_value
        return leaf.predict(x[leaf.selected_features])

    def gradient_row(self, x: Array) -> Array:
        """Gradient of the prediction with respect to the input.

        The reached leaf's cell is treated as fixed, so the gradient is zero
        outside the leaf's selected features; at a split boundary the value
        is the one-sided gradient of the leaf actually reached.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise DimensionMismatchError(
                f"expected vector of length {self.input_dim}, got shape {x.shape}"
            )
        grad = np.zeros(self.input_dim)
        leaf = self.route(x)
        if leaf.mode == LEAF_LINEAR and leaf.selected_features:
            sel = leaf.selected_features
            jac = extend_features_jacobian(x[sel])
            grad[sel] = jac.T @ leaf.weights
        return grad

    def predict(self, x: Array) -> Array:
        """Vectorized prediction over the rows of an (n, d) matrix."""
        x = self._check_matrix(x)
        out = np.zeros(x.shape[0])
        self._apply(self.root, x, np.arange(x.shape[0]), out, want_grad=False)
        return out

    def gradient(self, x: Array) -> Array:
        """Vectorized input gradients, shape (n, d)."""
        x = self._check_matrix(x)
        out = np.zeros_like(x)
        self._apply(self.root, x, np.arange(x.shape[0]), out, want_grad=True)
        return out

    def route(self, x: Array) -> LeafModel:
        """Leaf reached by a single sample."""
        node = self.root
        while isinstance(node, SplitNode):
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node

    def leaves(self) -> list[LeafModel]:
        """All leaves, left to right."""
        found: list[LeafModel] = []

        def walk(node):
            if isinstance(node, SplitNode):
                walk(node.left)
                walk(node.right)
            else:
                found.append(node)

        walk(self.root)
        return found

    def split_thresholds(self) -> list[tuple[int, float]]:
        """(feature, threshold) for every internal node, preorder."""
        found: list[tuple[int, float]] = []

        def walk(node):
            if isinstance(node, SplitNode):
                found.append((node.feature, node.threshold))
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return found

    def _check_matrix(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise DimensionMismatchError(
                f"expected (n, {self.input_dim}) matrix, got shape {x.shape}"
            )
        return x

    def _apply(self, node, x: Array, rows: Array, out: Array, want_grad: bool):
        if isinstance(node, SplitNode):
            go_left = x[rows, node.feature] <= node.threshold
            left_rows = rows[go_left]
            right_rows = rows[~go_left]
            if left_rows.size:
                self._apply(node.left, x, left_rows, out, want_grad)
            if right_rows.size:
                self._apply(node.right, x, right_rows, out, want_grad)
            return
        leaf: LeafModel = node
        if want_grad:
            if leaf.mode == LEAF_LINEAR and leaf.selected_features:
                sel = leaf.selected_features
                k = len(sel)
                xs = x[np.ix_(rows, sel)]
                w_lin = leaf.weights[1 : k + 1]
                w_sq = leaf.weights[k + 1 :]
                out[np.ix_(rows, sel)] = w_lin + 2.0 * xs * w_sq
        else:
            if leaf.mode == LEAF_CONSTANT:
                out[rows] = leaf.constant_value
            else:
                sel = leaf.selected_features
                k = len(sel)
                if k == 0:
                    out[rows] = leaf.weights[0]
                else:
                    xs = x[np.ix_(rows, sel)]
                    out[rows] = (
                        leaf.weights[0] + xs @ leaf.weights[1 : k + 1] + (xs * xs) @ leaf.weights[k + 1 :]
                    )


def extend_features(x: Array) -> Array:
    """Map a length-k vector to the length 2k+1 basis [1, x, x^2]."""
    x = np.asarray(x, dtype=np.float64)
    return np.concatenate(([1.0], x, x * x))


def extend_features_matrix(x: Array) -> Array:
    """Row-wise basis extension of an (m, k) matrix to (m, 2k+1)."""
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[0]
    return np.hstack([np.ones((m, 1)), x, x * x])


def extend_features_jacobian(x: Array) -> Array:
    """Jacobian of :func:`extend_features`, shape (2k+1, k).

    Zero row for the constant, identity block for the linear terms and a
    diagonal ``2 x_j`` block for the squared terms.
    """
    x = np.asarray(x, dtype=np.float64)
    k = x.size
    jac = np.zeros((2 * k + 1, k))
    jac[1 : k + 1] = np.eye(k)
    jac[k + 1 :] = np.diag(2.0 * x)
    return jac


def fit_leaf(x_leaf: Array, targets: Array, selected_features, lam: float) -> LeafModel:
    """Ridge-fit a linear leaf over the path-selected features.

    With an empty selection the basis degenerates to the constant 1 and the
    fit is a (lambda-shrunken) mean.
    """
    x_leaf = np.asarray(x_leaf, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if x_leaf.shape[0] < 1:
        raise EmptyInputError("cannot fit a leaf on zero samples")
    selected = list(selected_features)
    basis = extend_features_matrix(x_leaf[:, selected])
    weights = ridge_solve(basis, targets, lam)
    return LeafModel(mode=LEAF_LINEAR, selected_features=selected, weights=weights)


def path_features(tree: DecisionTree, leaf: LeafModel) -> list[int]:
    """Split features on the root-to-leaf path, deduplicated, in first-occurrence order."""
    result: list[int] | None = None

    def walk(node, path: list[int]):
        nonlocal result
        if result is not None:
            return
        if node is leaf:
            seen: list[int] = []
            for f in path:
                if f not in seen:
                    seen.append(f)
            result = seen
            return
        if isinstance(node, SplitNode):
            path.append(node.feature)
            walk(node.left, path)
            walk(node.right, path)
            path.pop()

    walk(tree.root, [])
    if result is None:
        raise ValueError("leaf does not belong to this tree")
    return result


def presort_columns(x: Array) -> list[Array]:
    """Stable per-column argsort, shared across the trees of one ensemble fit."""
    return [np.argsort(x[:, j], kind="stable") for j in range(x.shape[1])]


def fit_tree(
    x: Array,
    targets: Array,
    params: TreeParams,
    rng: np.random.Generator | None = None,
    presorted: list[Array] | None = None,
) -> DecisionTree:
    """Grow a tree greedily, then refit its leaves.

    Args:
        x: samples, shape (n, d).
        targets: regression targets, shape (n,).
        params: growth/leaf settings.
        rng: unused today (growth is exact and deterministic); kept so the
            signature matches the other fitting entry points.
        presorted: per-column stable argsort of ``x``; pass when fitting many
            trees on the same matrix to skip the re-sorting cost.
    """
    x = np.asarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatchError(f"expected (n, d) matrix, got shape {x.shape}")
    n, d = x.shape
    if n == 0:
        raise EmptyInputError("cannot fit a tree on zero samples")
    if targets.shape != (n,):
        raise DimensionMismatchError(f"expected {n} targets, got shape {targets.shape}")
    if not np.isfinite(x).all() or not np.isfinite(targets).all():
        raise NonFiniteInputError("tree inputs contain non-finite values")

    orders = presorted if presorted is not None else presort_columns(x)
    membership = np.empty(n, dtype=bool)  # scratch reused by every partition
    max_depth_reached = 0

    def make_leaf(rows: Array, path: list[int]) -> LeafModel:
        if params.leaf_mode == LEAF_CONSTANT:
            return LeafModel(mode=LEAF_CONSTANT, constant_value=float(np.mean(targets[rows])))
        selected: list[int] = []
        for f in path:
            if f not in selected:
                selected.append(f)
        return fit_leaf(x[rows], targets[rows], selected, params.ridge_lambda)

    def best_split(node_orders: list[Array]):
        m = node_orders[0].size
        msl = params.min_samples_leaf
        best = None  # (improvement, feature, threshold, left_count)
        counts = np.arange(1, m)
        for j in range(d):
            idx = node_orders[j]
            values = x[idx, j]
            prefix = np.cumsum(targets[idx])
            total = prefix[-1]
            distinct = values[1:] > values[:-1]
            valid = distinct & (counts >= msl) & (m - counts >= msl)
            if not valid.any():
                continue
            mean_left = prefix[:-1] / counts
            mean_right = (total - prefix[:-1]) / (m - counts)
            gap = mean_left - mean_right
            improvement = (counts * (m - counts) / m) * gap * gap
            improvement[~valid] = -np.inf
            pos = int(np.argmax(improvement))  # first max = lowest threshold
            if best is None or improvement[pos] > best[0]:
                k = pos + 1
                lo, hi = values[pos], values[pos + 1]
                threshold = 0.5 * (lo + hi)
                if threshold >= hi:  # midpoint rounded up to hi; keep routing consistent
                    threshold = lo
                best = (float(improvement[pos]), j, float(threshold), k)
        return best

    def grow(node_orders: list[Array], depth: int, path: list[int]):
        nonlocal max_depth_reached
        max_depth_reached = max(max_depth_reached, depth)
        rows = node_orders[0]
        m = rows.size
        if depth >= params.max_depth or m < params.min_samples_split:
            return make_leaf(rows, path)
        best = best_split(node_orders)
        if best is None or best[0] <= 0.0:
            return make_leaf(rows, path)
        _, feature, threshold, left_count = best
        left_sorted = node_orders[feature][:left_count]
        membership[rows] = False
        membership[left_sorted] = True
        left_orders = []
        right_orders = []
        for idx in node_orders:
            mask = membership[idx]
            left_orders.append(idx[mask])
            right_orders.append(idx[~mask])
        path.append(feature)
        left = grow(left_orders, depth + 1, path)
        right = grow(right_orders, depth + 1, path)
        path.pop()
        return SplitNode(feature=feature, threshold=threshold, left=left, right=right)

    root = grow(orders, 0, [])
    return DecisionTree(root=root, input_dim=d, depth=max_depth_reached)

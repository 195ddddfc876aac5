"""Scalar-output gradient boosting over the piecewise-linear trees.

Boosting is plain least squares: each round fits a tree to the negative
gradient of the squared error at the current accumulated prediction, then
adds the tree's output scaled by the shrinkage factor.  The ensemble's
prediction is the shrinkage-scaled sum over trees, so its input gradient is
the shrinkage-scaled sum of the member tree gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, EmptyInputError
from .tree import DecisionTree, TreeParams, fit_tree, presort_columns

Array = np.ndarray


@dataclass
class BoosterParams:
    n_boosters: int
    shrinkage: float = 0.25
    tree: TreeParams = field(default_factory=lambda: TreeParams(max_depth=4))

    def __post_init__(self):
        if self.n_boosters < 1:
            raise ValueError(f"n_boosters must be >= 1, got {self.n_boosters}")
        if not 0.0 < self.shrinkage <= 1.0:
            raise ValueError(f"shrinkage must be in (0, 1], got {self.shrinkage}")


@dataclass
class Booster:
    """Fitted ensemble; immutable, safe for concurrent prediction."""

    trees: list[DecisionTree]
    shrinkage: float
    input_dim: int

    def predict_row(self, x: Array) -> float:
        x = self._check_row(x)
        return self.shrinkage * sum(tree.predict_row(x) for tree in self.trees)

    def gradient_row(self, x: Array) -> Array:
        x = self._check_row(x)
        grad = np.zeros(self.input_dim)
        for tree in self.trees:
            grad += tree.gradient_row(x)
        grad *= self.shrinkage
        return grad

    def predict(self, x: Array) -> Array:
        """Vectorized prediction over the rows of an (n, d) matrix."""
        x = self._check_matrix(x)
        out = np.zeros(x.shape[0])
        for tree in self.trees:
            out += tree.predict(x)
        out *= self.shrinkage
        return out

    def gradient(self, x: Array) -> Array:
        """Vectorized input gradients, shape (n, d)."""
        x = self._check_matrix(x)
        out = np.zeros_like(x, dtype=np.float64)
        for tree in self.trees:
            out += tree.gradient(x)
        out *= self.shrinkage
        return out

    def _check_row(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise DimensionMismatchError(
                f"expected vector of length {self.input_dim}, got shape {x.shape}"
            )
        return x

    def _check_matrix(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise DimensionMismatchError(
                f"expected (n, {self.input_dim}) matrix, got shape {x.shape}"
            )
        return x


def fit_booster(
    x: Array,
    targets: Array,
    params: BoosterParams,
    rng: np.random.Generator | None = None,
    presorted: list[Array] | None = None,
) -> Booster:
    """Fit an ensemble of ``params.n_boosters`` trees to scalar targets.

    The accumulated prediction starts at zero (no constant offset tree; the
    first tree's leaves absorb the target mean) and each round fits the
    negative residual of the squared error.
    """
    x = np.asarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyInputError(f"need a nonempty (n, d) matrix, got shape {x.shape}")
    if targets.shape != (x.shape[0],):
        raise DimensionMismatchError(
            f"expected {x.shape[0]} targets, got shape {targets.shape}"
        )
    orders = presorted if presorted is not None else presort_columns(x)
    accumulated = np.zeros(x.shape[0])
    trees: list[DecisionTree] = []
    for _ in range(params.n_boosters):
        residual = accumulated - targets
        tree = fit_tree(x, -residual, params.tree, rng, presorted=orders)
        accumulated += params.shrinkage * tree.predict(x)
        trees.append(tree)
    return Booster(trees=trees, shrinkage=params.shrinkage, input_dim=x.shape[1])

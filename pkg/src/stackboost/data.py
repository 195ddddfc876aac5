"""Synthetic dataset generators, CSV ingestion, fold plans, and metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import CsvParseError, InvalidKError, ShapeMismatchError

Array = np.ndarray

TASK_REGRESSION = "regression"
TASK_CLASSIFICATION = "classification"


@dataclass
class Dataset:
    """Row-major features and targets plus task metadata.

    Classification targets are one-hot rows, except for the binary case
    which may be stored as a single 0/1 column.
    """

    x: Array
    y: Array
    task: str
    feature_names: list[str] = field(default_factory=list)
    target_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.x.ndim != 2 or self.y.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise ShapeMismatchError(f"features {self.x.shape} vs targets {self.y.shape}")
        if not self.feature_names:
            self.feature_names = [f"x{j}" for j in range(self.x.shape[1])]
        if not self.target_names:
            self.target_names = [f"y{j}" for j in range(self.y.shape[1])]

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def subset(self, rows: Array) -> "Dataset":
        return Dataset(
            x=self.x[rows],
            y=self.y[rows],
            task=self.task,
            feature_names=list(self.feature_names),
            target_names=list(self.target_names),
        )


def gen_circle(n: int, seed: int) -> Dataset:
    """Two concentric annuli: outer radius U(0.8, 1.0) labeled 0, inner
    radius U(0.4, 0.6) labeled 1, angles U(0, 2pi)."""
    if n % 2 != 0:
        raise ValueError(f"n must be even, got {n}")
    rng = np.random.default_rng(seed)
    half = n // 2
    angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
    radii = np.concatenate(
        [rng.uniform(0.8, 1.0, size=half), rng.uniform(0.4, 0.6, size=half)]
    )
    x = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    y = np.concatenate([np.zeros(half), np.ones(half)])[:, None]
    return Dataset(x=x, y=y, task=TASK_CLASSIFICATION, target_names=["label"])


def gen_curve(n: int, seed: int) -> Dataset:
    """Noisy 3-D curve [t, sin t + eps, cos t + eps], t ~ U(-1, 1), for
    self-reconstruction; targets duplicate the features."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    t = rng.uniform(-1.0, 1.0, size=n)
    x = np.column_stack(
        [t, np.sin(t) + rng.normal(0.0, 0.05, size=n), np.cos(t) + rng.normal(0.0, 0.05, size=n)]
    )
    return Dataset(x=x, y=x.copy(), task=TASK_REGRESSION)


def gen_random_nn(n: int, in_dim: int = 32, hidden: int = 16, seed: int = 0) -> Dataset:
    """Inputs U(0,1)^in_dim; targets from a fixed randomly initialized
    two-layer ReLU network (weight std 1/sqrt(fan-in), zero bias)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(hidden, in_dim))
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(1, hidden))
    x = rng.uniform(0.0, 1.0, size=(n, in_dim))
    y = np.maximum(x @ w1.T, 0.0) @ w2.T
    return Dataset(x=x, y=y, task=TASK_REGRESSION)


GENERATORS = {"circle": gen_circle, "curve": gen_curve, "rand-nn": gen_random_nn}


def one_hot_encode(values: list[str], categories: list[str]) -> Array:
    """One column per category, in the given order; unknown values map to an
    all-zeros row."""
    index = {c: i for i, c in enumerate(categories)}
    out = np.zeros((len(values), len(categories)))
    for row, value in enumerate(values):
        col = index.get(value)
        if col is not None:
            out[row, col] = 1.0
    return out


def load_csv(
    path: str,
    target_columns: list[str],
    categorical_columns: list[str] | None = None,
    task: str = TASK_REGRESSION,
    categories: dict[str, list[str]] | None = None,
) -> Dataset:
    """Read a comma-delimited, headered file into a Dataset.

    Numeric columns pass through.  Categorical feature columns expand to
    one-hot blocks in lexicographic category order; categorical target
    columns do the same (classification targets become one-hot).  Numeric
    target columns pass through even for classification, so binary 0/1
    labels stay a single column.

    ``categories`` pins the category list per column (values seen at charge
    time); values outside the list encode as an all-zeros block.

    Raises:
        CsvParseError: missing values, non-numeric text in numeric columns,
            unknown column names, or ragged rows.
    """
    categorical = set(categorical_columns or [])
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: file is empty") from None
        rows = list(reader)
    for name in list(target_columns) + sorted(categorical):
        if name not in header:
            raise CsvParseError(f"{path}: no column named {name!r}", column=name)
    columns: dict[str, list[str]] = {name: [] for name in header}
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise CsvParseError(
                f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}", row=i + 2
            )
        for name, cell in zip(header, row):
            columns[name].append(cell)

    def numeric(name: str) -> Array:
        raw = columns[name]
        out = np.empty(len(raw))
        for i, cell in enumerate(raw):
            try:
                out[i] = float(cell)
            except ValueError:
                raise CsvParseError(
                    f"{path}: row {i + 2}, column {name!r}: not a number: {cell!r}",
                    row=i + 2,
                    column=name,
                ) from None
        return out

    def encode(name: str) -> tuple[Array, list[str]]:
        cats = (categories or {}).get(name) or sorted(set(columns[name]))
        block = one_hot_encode(columns[name], cats)
        return block, [f"{name}={c}" for c in cats]

    feature_blocks: list[Array] = []
    feature_names: list[str] = []
    target_blocks: list[Array] = []
    target_names: list[str] = []
    for name in header:
        is_target = name in target_columns
        if name in categorical:
            block, names = encode(name)
        else:
            block, names = numeric(name)[:, None], [name]
        if is_target:
            target_blocks.append(block)
            target_names.extend(names)
        else:
            feature_blocks.append(block)
            feature_names.extend(names)
    return Dataset(
        x=np.hstack(feature_blocks) if feature_blocks else np.zeros((len(rows), 0)),
        y=np.hstack(target_blocks) if target_blocks else np.zeros((len(rows), 0)),
        task=task,
        feature_names=feature_names,
        target_names=target_names,
    )


def write_csv(path: str, dataset: Dataset):
    """Features then targets, one header row, repr-exact doubles."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(dataset.feature_names + dataset.target_names)
        for xi, yi in zip(dataset.x, dataset.y):
            writer.writerow([repr(v) for v in xi] + [repr(v) for v in yi])


@dataclass
class FoldPlan:
    """Random partition of n rows into k near-equal folds."""

    k: int
    assignments: Array  # per-row fold index
    seed: int

    def test_rows(self, fold: int) -> Array:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> Array:
        return np.flatnonzero(self.assignments != fold)


def kfold(n: int, k: int, seed: int) -> FoldPlan:
    """Shuffle the index set and chunk it into k folds whose sizes differ by
    at most one (the first n % k folds get the extra row)."""
    if k < 1 or k > n:
        raise InvalidKError(f"need 1 <= k <= {n}, got k={k}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    base, extra = divmod(n, k)
    start = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        assignments[perm[start : start + size]] = fold
        start += size
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def rmse(pred: Array, y: Array) -> float:
    """Root mean squared error over all entries."""
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if pred.shape != y.shape:
        raise ShapeMismatchError(f"predictions {pred.shape} vs targets {y.shape}")
    return float(np.sqrt(np.mean((pred - y) ** 2)))


def accuracy(pred: Array, y: Array) -> float:
    """Fraction of rows whose predicted class matches the target class.

    Multi-column rows compare argmax (ties to the lowest index).  Single
    column predictions are binary scores thresholded at 0.5 against 0/1
    labels.
    """
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if pred.shape != y.shape:
        raise ShapeMismatchError(f"predictions {pred.shape} vs targets {y.shape}")
    if pred.shape[1] == 1:
        return float(np.mean((pred[:, 0] >= 0.5) == (y[:, 0] >= 0.5)))
    return float(np.mean(pred.argmax(axis=1) == y.argmax(axis=1)))

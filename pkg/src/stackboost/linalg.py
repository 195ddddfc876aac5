"""Small dense numeric kernels: ridge solves, finite differences, seeded noise.

Everything here is a pure function of its arguments; random state is always
passed in explicitly as a ``numpy.random.Generator`` so runs are reproducible
bit for bit.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg

from .errors import NonFiniteInputError, NonFiniteResultError, SingularSystemError

Array = np.ndarray


def ridge_solve(a: Array, y: Array, lam: float) -> Array:
    """Solve ``min_w ||A w - y||^2 + lam ||w||^2`` by the normal equations.

    Forms the Gram matrix ``A^T A + lam I`` and factors it with a Cholesky
    decomposition; systems here are tiny (a handful of columns), so the
    normal equations are both fast and accurate enough.

    Args:
        a: design matrix, shape (n, d).
        y: targets, shape (n,).
        lam: L2 penalty, >= 0.  With lam == 0 the Gram matrix must be
            nonsingular.

    Raises:
        SingularSystemError: lam == 0 and the Gram matrix is rank-deficient.
        NonFiniteInputError: a or y contains NaN or infinity.
    """
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if a.ndim != 2 or y.ndim != 1 or a.shape[0] != y.shape[0]:
        raise ValueError(f"need (n, d) matrix and length-n vector, got {a.shape} and {y.shape}")
    if lam < 0:
        raise ValueError(f"penalty must be nonnegative, got {lam}")
    if not np.isfinite(a).all() or not np.isfinite(y).all():
        raise NonFiniteInputError("ridge system contains non-finite values")
    gram = a.T @ a
    gram[np.diag_indices_from(gram)] += lam
    rhs = a.T @ y
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"Gram matrix is not positive definite (lam={lam}); "
            "increase the penalty or drop collinear columns"
        ) from exc
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


def finite_diff_gradient(f: Callable[[Array], float], x: Array, eps: float) -> Array:
    """Central-difference gradient of a scalar function.

    Probes ``f`` at ``x +- eps * e_j`` for every coordinate; used as the
    independent oracle against analytic gradients in the test suite.

    Raises:
        NonFiniteResultError: any probe evaluates to NaN or infinity.
    """
    x = np.asarray(x, dtype=np.float64)
    if eps <= 0:
        raise ValueError(f"step must be positive, got {eps}")
    grad = np.empty_like(x)
    for j in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[j] += eps
        lo[j] -= eps
        f_hi = float(f(hi))
        f_lo = float(f(lo))
        if not (np.isfinite(f_hi) and np.isfinite(f_lo)):
            raise NonFiniteResultError(f"probe at coordinate {j} returned a non-finite value")
        grad[j] = (f_hi - f_lo) / (2.0 * eps)
    return grad


def gaussian_matrix(
    rows: int, cols: int, mean: float, std: float, rng: np.random.Generator
) -> Array:
    """Draw an (rows, cols) matrix of i.i.d. normal samples from ``rng``."""
    if std <= 0:
        raise ValueError(f"std must be positive, got {std}")
    return rng.normal(mean, std, size=(rows, cols))


def spawn_rngs(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Split ``rng`` into ``n`` independent child generators, deterministically."""
    return rng.spawn(n)

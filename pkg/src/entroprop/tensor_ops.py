"""Dense linear algebra and spatial primitives.

Everything here works on plain float64 numpy arrays: 2-d arrays are
matrices, 3-d arrays are channel-major stacks of feature maps.  The
log-determinant is computed from an LU factorization with partial
pivoting so that determinants far outside double range stay usable in
log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, SingularMatrixError

# Pivot magnitudes at or below this are treated as exact zeros: they sit
# below anything double precision can meaningfully invert.
SINGULAR_PIVOT_THRESHOLD = 1e-300


@dataclass(frozen=True)
class LogDet:
    """A determinant held in log-magnitude form.

    ``log_abs`` is log|det| in nats, ``sign`` is -1, 0, or +1, and
    ``sign == 0`` exactly when ``log_abs == -inf``.
    """

    log_abs: float
    sign: int

    def magnitude(self) -> float:
        """|det| recovered from log space; 0.0 for a singular matrix."""
        return float(np.exp(self.log_abs)) if self.sign != 0 else 0.0


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d array, got shape {a.shape}")
    return a


def lu_factor(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """LU factorization with partial pivoting.

    Returns ``(lu, perm, parity)`` where ``lu`` packs the unit-lower L
    below the diagonal and U on and above it, ``perm`` satisfies
    ``m[perm] = L @ U``, and ``parity`` is +1/-1 for an even/odd number
    of row swaps.  Zero pivots are left in place for the caller to
    inspect (the trailing submatrix is then not eliminated further).
    """
    a = _as_matrix(m).copy()
    n, nc = a.shape
    if n != nc:
        raise DimensionError(f"matrix must be square, got {n}x{nc}")
    if n == 0:
        raise DimensionError("matrix must be nonempty")
    perm = np.arange(n)
    parity = 1
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if p != k:
            a[[k, p]] = a[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            parity = -parity
        pivot = a[k, k]
        if abs(pivot) <= SINGULAR_PIVOT_THRESHOLD:
            return a, perm, parity
        a[k + 1 :, k] /= pivot
        a[k + 1 :, k + 1 :] -= np.outer(a[k + 1 :, k], a[k, k + 1 :])
    return a, perm, parity


def lu_logabsdet(m: np.ndarray) -> LogDet:
    """log|det| and determinant sign via LU with partial pivoting.

    The result is exact ``(-inf, 0)`` whenever any pivot magnitude falls
    at or below :data:`SINGULAR_PIVOT_THRESHOLD`; otherwise
    ``log_abs = sum(log|pivot|)`` and ``sign`` is the product of pivot
    signs times the permutation parity.
    """
    lu, _, parity = lu_factor(m)
    pivots = np.diag(lu)
    if np.any(np.abs(pivots) <= SINGULAR_PIVOT_THRESHOLD):
        return LogDet(float("-inf"), 0)
    sign = parity * (1 if int(np.sum(pivots < 0)) % 2 == 0 else -1)
    return LogDet(float(np.sum(np.log(np.abs(pivots)))), sign)


def logabsdet_and_inverse_transpose(m: np.ndarray) -> tuple[LogDet, np.ndarray]:
    """One LU pass yielding both log|det| and the inverse transpose.

    Raises :class:`SingularMatrixError` for numerically singular input;
    the two triangular solves reuse the LU factors.
    """
    lu, perm, parity = lu_factor(m)
    pivots = np.diag(lu)
    if np.any(np.abs(pivots) <= SINGULAR_PIVOT_THRESHOLD):
        raise SingularMatrixError("matrix is numerically singular")
    sign = parity * (1 if int(np.sum(pivots < 0)) % 2 == 0 else -1)
    logdet = LogDet(float(np.sum(np.log(np.abs(pivots)))), sign)
    # m[perm] = L U, so inv(m) = inv(U) inv(L) P with P = I[perm].
    rhs = np.eye(lu.shape[0])[perm]
    y = solve_triangular(lu, rhs, lower=True, unit_diagonal=True)
    inv = solve_triangular(lu, y, lower=False)
    return logdet, inv.T


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with explicit shape validation."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"inner dimensions differ: {a.shape} x {b.shape}"
        )
    return a @ b


def conv2d(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Valid 2-d cross-correlation of an image with a filter.

    ``out[i, j] = sum_{k, m} c[k, m] * x[i + k, j + m]`` with unit
    stride and no padding, so an ``l x w`` image and ``p x q`` filter
    give an ``(l - p + 1) x (w - q + 1)`` map.
    """
    x = _as_matrix(x)
    c = _as_matrix(c)
    l, w = x.shape
    p, q = c.shape
    if p == 0 or q == 0 or l == 0 or w == 0:
        raise DimensionError("inputs must be nonempty")
    if p > l or q > w:
        raise DimensionError(
            f"filter {p}x{q} larger than input {l}x{w}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(x, (p, q))
    return np.einsum("ijpq,pq->ij", windows, c)


def maxpool2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 max pooling with stride 2.

    Odd trailing rows/columns are trimmed.  Returns ``(pooled, arg)``
    where ``arg[i, j]`` in 0..3 is the row-major position of the max
    inside its 2x2 block, as needed to route gradients in backprop.
    """
    x = _as_matrix(x)
    l, w = x.shape
    h2, w2 = l // 2, w // 2
    if h2 == 0 or w2 == 0:
        raise DimensionError(f"input {l}x{w} too small for 2x2 pooling")
    blocks = (
        x[: 2 * h2, : 2 * w2]
        .reshape(h2, 2, w2, 2)
        .transpose(0, 2, 1, 3)
        .reshape(h2, w2, 4)
    )
    arg = np.argmax(blocks, axis=2)
    pooled = np.take_along_axis(blocks, arg[:, :, None], axis=2)[:, :, 0]
    return pooled, arg
